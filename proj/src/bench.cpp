#include "vnv/bench.hpp"

#include <algorithm>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>

#include "vnv/baselines.hpp"
#include "vnv/error.hpp"

namespace vnv::bench {

namespace {

template <typename T>
std::string field(const std::optional<T>& v) {
  if (!v) return {};
  std::ostringstream s;
  s << *v;
  return s.str();
}

std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

HeapConfig heap_config(std::size_t cache, std::size_t limit) {
  HeapConfig c;
  c.cache_size_bytes = cache;
  c.max_modified_state_bytes = limit;
  return c;
}

std::vector<std::byte> filled(std::size_t n, std::uint8_t v) { return std::vector<std::byte>(n, std::byte{v}); }

}  // namespace

std::string csv_header() {
  return "benchmark,backend,variant,cache_size,dirty_limit,object_size,page_size,pattern,seed,initial_len,"
         "metadata_bytes,words_read,words_written,time_us,energy_uj,reps";
}

std::string csv_row(const BenchRecord& r, const EnergyModel& model) {
  const double words = r.words();
  const double time_us = words * model.word_latency_us;
  // mW * us = nJ
  const double energy_uj = model.power_mw * time_us * 1e-3;
  std::ostringstream s;
  s << r.benchmark << ',' << r.backend << ',' << r.variant << ',' << field(r.cache_size) << ','
    << field(r.dirty_limit) << ',' << field(r.object_size) << ',' << field(r.page_size) << ',' << field(r.pattern)
    << ',' << field(r.seed) << ',' << field(r.initial_len) << ',' << field(r.metadata_bytes) << ','
    << number(r.words_read) << ',' << number(r.words_written) << ',' << number(time_us) << ','
    << number(energy_uj) << ',' << r.reps;
  return s.str();
}

void write_csv(std::ostream& out, const std::vector<BenchRecord>& records, const EnergyModel& model) {
  out << csv_header() << '\n';
  for (const auto& r : records) out << csv_row(r, model) << '\n';
}

// ---- access ----

AccessCase parse_access_case(const std::string& name) {
  if (name == "best") return AccessCase::kBest;
  if (name == "bad") return AccessCase::kBad;
  if (name == "worst") return AccessCase::kWorst;
  throw Error(ErrorCode::kInvalidArgument, "unknown access case '" + name + "'");
}

std::string to_string(AccessCase c) {
  switch (c) {
    case AccessCase::kBest:
      return "best";
    case AccessCase::kBad:
      return "bad";
    case AccessCase::kWorst:
      return "worst";
  }
  return "?";
}

BenchRecord run_access_bench(AccessCase which, std::size_t object_size, const std::string& backend) {
  if (object_size == 0 || object_size > kAccessMaxObject) {
    throw Error(ErrorCode::kInvalidArgument, "object size must be in 1..1024");
  }
  BenchRecord rec;
  rec.benchmark = "access";
  rec.backend = backend;
  rec.variant = to_string(which);
  rec.object_size = object_size;
  SimulatedNvm nvm;

  if (backend == "module") {
    ModuleSwapApp app(nvm, 2, kAccessMaxObject);
    // Best: the object lives in the resident module. Otherwise it lives in the other one.
    const std::size_t target = which == AccessCase::kBest ? 0 : 1;
    nvm.reset_cost_meter();
    app.module_access(target, 0, object_size, AccessMode::kRead);
  } else if (backend == "vnv") {
    rec.cache_size = kAccessCacheBytes;
    rec.dirty_limit = kAccessCacheBytes;
    VnvHeap heap(nvm, heap_config(kAccessCacheBytes, kAccessCacheBytes));
    auto target = heap.alloc(filled(object_size, 0xA5));
    if (which != AccessCase::kBest) heap.evict(target);
    if (which == AccessCase::kWorst) {
      // A modified object that fills the cache has to be synced and unloaded first.
      heap.alloc(filled(kAccessMaxObject, 0x5A));
    }
    nvm.reset_cost_meter();
    auto guard = heap.get_ref(target);
    if (guard.bytes()[object_size - 1] != std::byte{0xA5}) throw Error(ErrorCode::kIo, "access returned wrong data");
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown access backend '" + backend + "'");
  }
  rec.words_read = static_cast<double>(nvm.cost_meter().words_read);
  rec.words_written = static_cast<double>(nvm.cost_meter().words_written);
  return rec;
}

// ---- queue ----

BenchRecord run_queue_bench(std::size_t initial_len, const std::string& backend, std::size_t reps,
                            std::size_t cache_size, std::optional<std::size_t> dirty_limit) {
  constexpr std::size_t kElement = 256;
  if (reps == 0) throw Error(ErrorCode::kInvalidArgument, "reps must be positive");
  BenchRecord rec;
  rec.benchmark = "queue";
  rec.backend = backend;
  rec.object_size = kElement;
  rec.initial_len = initial_len;
  rec.reps = reps;

  SimulatedNvm nvm;
  std::unique_ptr<VnvHeap> heap;
  std::unique_ptr<Queue> queue;
  if (backend == "vnv") {
    rec.cache_size = cache_size;
    rec.dirty_limit = dirty_limit.value_or(cache_size);
    heap = std::make_unique<VnvHeap>(nvm, heap_config(cache_size, *rec.dirty_limit));
    queue = std::make_unique<VnvQueue>(*heap, kElement);
  } else if (backend == "nvm") {
    queue = std::make_unique<NvmQueue>(nvm, kElement, initial_len + 2);
  } else if (backend == "ram") {
    rec.cache_size = RamQueue::kDefaultRamBytes;
    queue = std::make_unique<RamQueue>(kElement);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown queue backend '" + backend + "'");
  }

  std::uint64_t tag = 0;
  auto next = [&] {
    const std::uint64_t t = tag++;
    return make_value(static_cast<Key>(t), kElement, t);
  };
  for (std::size_t i = 0; i < initial_len; ++i) queue->push(next());
  // Cycle the whole queue once so the measured operations see steady state.
  for (std::size_t i = 0; i < initial_len + 16; ++i) {
    queue->push(next());
    queue->pop();
  }
  nvm.reset_cost_meter();
  std::uint64_t expect = tag - initial_len;
  for (std::size_t i = 0; i < reps; ++i) {
    queue->push(next());
    if (queue->pop() != make_value(static_cast<Key>(expect), kElement, expect)) {
      throw Error(ErrorCode::kIo, "queue lost FIFO order");
    }
    ++expect;
  }
  rec.words_read = static_cast<double>(nvm.cost_meter().words_read) / static_cast<double>(reps);
  rec.words_written = static_cast<double>(nvm.cost_meter().words_written) / static_cast<double>(reps);
  return rec;
}

// ---- persist ----

PersistMode parse_persist_mode(const std::string& name) {
  if (name == "vary_limit" || name == "vary-limit") return PersistMode::kVaryLimit;
  if (name == "vary_ram" || name == "vary-ram") return PersistMode::kVaryRam;
  throw Error(ErrorCode::kInvalidArgument, "unknown persist mode '" + name + "'");
}

std::vector<std::size_t> default_persist_values(PersistMode mode) {
  if (mode == PersistMode::kVaryLimit) return {512, 1024, 2048, 4096};
  return {4096, 8192, 16384, 32768};
}

BenchRecord measure_saturated_persist(std::size_t cache_size, std::size_t dirty_limit, std::uint64_t seed,
                                      std::size_t rounds) {
  // Four objects sized so that all of them modified fill the budget exactly.
  constexpr std::size_t kWorkingSet = 4;
  const std::size_t per_object = (dirty_limit - layout::kPersistHeaderBytes) / kWorkingSet;
  if (per_object <= layout::kResidentMetadataBytes + 4) {
    throw Error(ErrorCode::kInvalidArgument, "dirty limit too small for the saturating workload");
  }
  const std::size_t object_size = (per_object - layout::kResidentMetadataBytes) & ~std::size_t{3};

  SimulatedNvm nvm;
  const auto config = heap_config(cache_size, dirty_limit);
  VnvHeap heap(nvm, config);
  std::mt19937_64 rng(seed);
  std::vector<ObjectHandle> set;
  for (std::size_t i = 0; i < kWorkingSet; ++i) set.push_back(heap.alloc(filled(object_size, 0)));

  BenchRecord rec;
  rec.benchmark = "persist";
  rec.backend = "vnv";
  rec.cache_size = cache_size;
  rec.dirty_limit = dirty_limit;
  rec.object_size = object_size;
  rec.seed = seed;
  rec.reps = rounds;
  std::uint64_t max_words = 0;
  for (std::size_t round = 0; round < rounds; ++round) {
    std::shuffle(set.begin(), set.end(), rng);
    // Early rounds touch part of the set; later ones all of it.
    const std::size_t touched = std::min(kWorkingSet, 1 + round % (kWorkingSet + 1));
    for (std::size_t i = 0; i < touched; ++i) {
      auto w = heap.get_mut(set[i]);
      std::fill(w.bytes().begin(), w.bytes().end(), static_cast<std::byte>(rng()));
    }
    nvm.arm_power_failure(persist_bound(config));
    const auto report = heap.persist();
    nvm.disarm_power_failure();
    max_words = std::max(max_words, report.words_transferred);
  }
  rec.words_written = static_cast<double>(max_words);
  return rec;
}

std::vector<BenchRecord> run_persist_bench(PersistMode mode, const std::vector<std::size_t>& values,
                                           std::uint64_t seed, std::size_t rounds) {
  std::vector<BenchRecord> out;
  for (std::size_t v : values) {
    const std::size_t ram = mode == PersistMode::kVaryRam ? v : 4096;
    const std::size_t limit = mode == PersistMode::kVaryRam ? 2048 : v;
    auto rec = measure_saturated_persist(ram, limit, seed, rounds);
    rec.variant = mode == PersistMode::kVaryRam ? "vary_ram" : "vary_limit";
    out.push_back(rec);

    SimulatedNvm nvm;
    UnmanagedRam baseline(nvm, ram);
    BenchRecord base;
    base.benchmark = "persist";
    base.backend = "unmanaged";
    base.variant = rec.variant;
    base.cache_size = ram;
    base.words_written = static_cast<double>(baseline.checkpoint());
    out.push_back(base);
  }
  return out;
}

// ---- key-value store ----

std::size_t vnv_metadata_bytes(std::size_t object_count) {
  return layout::kCompactObjectMetadataBytes * object_count;
}

std::size_t managed_state_metadata_bytes(std::size_t data_bytes, std::size_t page_size) {
  return (data_bytes + page_size - 1) / page_size;
}

BenchRecord run_kvs_bench(const std::string& backend, std::optional<std::size_t> page_size, PatternKind pattern,
                          std::uint64_t seed, std::size_t n_ops) {
  if (n_ops == 0) throw Error(ErrorCode::kInvalidArgument, "n_ops must be positive");
  const auto spec = WorkloadSpec::make(seed);
  BenchRecord rec;
  rec.benchmark = "kvs";
  rec.backend = backend;
  rec.pattern = to_string(pattern);
  rec.seed = seed;
  rec.dirty_limit = spec.dirty_limit();
  rec.reps = n_ops;

  SimulatedNvm nvm;
  std::unique_ptr<VnvHeap> heap;
  std::unique_ptr<ManagedStatePool> pool;
  std::unique_ptr<KvStore> store;
  if (backend == "vnv") {
    rec.cache_size = kKvsCacheBytes;
    rec.metadata_bytes = vnv_metadata_bytes(spec.sizes.size());
    heap = std::make_unique<VnvHeap>(nvm, heap_config(kKvsCacheBytes, spec.dirty_limit()));
    store = std::make_unique<VnvKvStore>(*heap);
  } else if (backend == "managed-state" || backend == "ms") {
    rec.backend = "managed-state";
    if (!page_size || !ManagedStatePool::valid_page_size(*page_size)) {
      throw Error(ErrorCode::kInvalidArgument, "managed-state needs --page-size in {32,64,128,256,512}");
    }
    rec.page_size = page_size;
    rec.cache_size = spec.total_bytes();
    rec.metadata_bytes = managed_state_metadata_bytes(spec.total_bytes(), *page_size);
    const auto limit = ManagedStatePool::page_limit_for_budget(spec.dirty_limit(), spec.total_bytes(), *page_size);
    pool = std::make_unique<ManagedStatePool>(nvm, spec.total_bytes(), *page_size, limit);
    store = std::make_unique<ManagedStateKvStore>(*pool);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown kvs backend '" + backend + "'");
  }

  for (Key k = 0; k < spec.sizes.size(); ++k) store->put(k, make_value(k, spec.sizes[k], 0));
  if (heap) heap->persist();
  if (pool) pool->ms_checkpoint();

  const auto keys = gen_access_sequence(pattern, spec.sizes.size(), n_ops, seed);
  std::vector<std::vector<std::byte>> values;
  values.reserve(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) values.push_back(make_value(keys[i], spec.sizes[keys[i]], i + 1));
  nvm.reset_cost_meter();
  for (std::size_t i = 0; i < keys.size(); ++i) store->update(keys[i], values[i]);
  rec.words_read = static_cast<double>(nvm.cost_meter().words_read) / static_cast<double>(n_ops);
  rec.words_written = static_cast<double>(nvm.cost_meter().words_written) / static_cast<double>(n_ops);
  return rec;
}

}  // namespace vnv::bench
