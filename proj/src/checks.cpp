#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "vnv/bench.hpp"
#include "vnv/error.hpp"

namespace vnv::bench {

namespace {

using Contents = std::map<ObjectId, std::vector<std::byte>>;

std::vector<std::byte> random_bytes(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::byte> v(n);
  for (auto& b : v) b = static_cast<std::byte>(rng());
  return v;
}

bool expected_refusal(ErrorCode c) {
  switch (c) {
    case ErrorCode::kStillPinned:
    case ErrorCode::kGuardActive:
    case ErrorCode::kWriteGuardActive:
    case ErrorCode::kCachePressureUnresolvable:
    case ErrorCode::kDirtyBudgetUnsatisfiable:
    case ErrorCode::kOutOfNvm:
      return true;
    default:
      return false;
  }
}

template <typename Guard>
void drop_random(std::vector<Guard>& guards, std::mt19937_64& rng) {
  if (guards.empty()) return;
  guards.erase(guards.begin() + static_cast<long>(rng() % guards.size()));
}

}  // namespace

TraceStats run_heap_trace(std::uint64_t seed, std::size_t operations, const HeapConfig& config) {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, config);
  const std::uint64_t bound = persist_bound(config);
  std::mt19937_64 rng(seed);
  std::vector<ObjectHandle> live;
  std::vector<ReadGuard> readers;
  std::vector<WriteGuard> writers;
  TraceStats stats;

  for (std::size_t i = 0; i < operations; ++i) {
    const unsigned op = rng() % 100;
    try {
      if (live.empty() || (op < 20 && live.size() < 96)) {
        live.push_back(heap.alloc(random_bytes(rng, 1 + rng() % 512)));
      } else if (op < 30) {
        const auto k = rng() % live.size();
        heap.dealloc(live[k]);
        live.erase(live.begin() + static_cast<long>(k));
      } else if (op < 55) {
        auto g = heap.get_ref(live[rng() % live.size()]);
        if (rng() % 8 == 0) readers.push_back(std::move(g));
      } else if (op < 85) {
        auto w = heap.get_mut(live[rng() % live.size()]);
        auto b = w.bytes();
        std::generate(b.begin(), b.end(), [&] { return static_cast<std::byte>(rng()); });
        if (rng() % 16 == 0) writers.push_back(std::move(w));
      } else if (op < 97) {
        drop_random(readers, rng);
        drop_random(writers, rng);
      } else {
        nvm.arm_power_failure(bound);
        try {
          const auto report = heap.persist();
          ++stats.persists;
          stats.max_persist_words = std::max(stats.max_persist_words, report.words_transferred);
          if (report.words_transferred > bound) ++stats.bound_violations;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kPowerFailureInjected) throw;
          ++stats.injected_failures;
          ++stats.bound_violations;
        }
        nvm.disarm_power_failure();
      }
    } catch (const Error& e) {
      if (!expected_refusal(e.code())) throw;
    }
    ++stats.operations;
    const auto dirty = heap.stats().dirty_bytes;
    stats.max_dirty_bytes = std::max(stats.max_dirty_bytes, dirty);
    if (dirty > config.max_modified_state_bytes) ++stats.dirty_violations;
  }
  return stats;
}

GuardStats run_guard_contract(std::uint64_t seed, std::size_t attempts) {
  SimulatedNvm nvm;
  HeapConfig config;
  config.cache_size_bytes = 1536;
  config.max_modified_state_bytes = 1024;
  VnvHeap heap(nvm, config);
  std::mt19937_64 rng(seed);
  std::vector<ObjectHandle> objects;
  for (int i = 0; i < 16; ++i) objects.push_back(heap.alloc(random_bytes(rng, 16 + rng() % 240)));

  std::vector<ReadGuard> readers;
  std::vector<WriteGuard> writers;
  std::vector<ReadGuard> dead_readers;
  std::vector<WriteGuard> dead_writers;
  GuardStats stats;
  auto violation = [&](const std::string& what) {
    ++stats.violations;
    if (stats.messages.size() < 10) stats.messages.push_back(what);
  };
  auto expect_code = [&](ErrorCode want, const std::string& what, auto&& fn) {
    try {
      fn();
      violation(what + ": no error");
    } catch (const Error& e) {
      if (e.code() != want) violation(what + ": got " + to_string(e.code()));
    }
  };
  auto pinned_ids = [&] {
    std::vector<ObjectId> ids;
    for (auto& g : readers) ids.push_back(g.handle().id());
    for (auto& g : writers) ids.push_back(g.handle().id());
    return ids;
  };

  for (std::size_t i = 0; i < attempts; ++i) {
    const auto& h = objects[rng() % objects.size()];
    const bool has_writer = heap.write_guard_live(h);
    const bool has_readers = heap.read_guard_count(h) > 0;
    const unsigned op = rng() % 10;
    try {
      if (op < 3) {
        if (has_writer) {
          expect_code(ErrorCode::kGuardActive, "second writable guard", [&] { heap.get_mut(h); });
          expect_code(ErrorCode::kWriteGuardActive, "reader beside writer", [&] { heap.get_ref(h); });
        } else if (has_readers) {
          expect_code(ErrorCode::kGuardActive, "writer beside readers", [&] { heap.get_mut(h); });
        } else {
          writers.push_back(heap.get_mut(h));
        }
      } else if (op < 6) {
        if (!has_writer) readers.push_back(heap.get_ref(h));
      } else if (op < 8) {
        if (!readers.empty() && rng() % 2) {
          auto k = rng() % readers.size();
          readers[k].release();
          dead_readers.push_back(std::move(readers[k]));
          readers.erase(readers.begin() + static_cast<long>(k));
        } else if (!writers.empty()) {
          auto k = rng() % writers.size();
          // Moving out leaves a dead guard behind, just like release().
          WriteGuard taken = std::move(writers[k]);
          dead_writers.push_back(std::move(writers[k]));
          writers.erase(writers.begin() + static_cast<long>(k));
        }
      } else if (op < 9) {
        if (!dead_readers.empty()) {
          expect_code(ErrorCode::kGuardReleased, "use of released reader",
                      [&] { (void)dead_readers[rng() % dead_readers.size()].bytes(); });
        }
        if (!dead_writers.empty()) {
          expect_code(ErrorCode::kGuardReleased, "use of released writer",
                      [&] { (void)dead_writers[rng() % dead_writers.size()].bytes(); });
        }
      } else {
        // Pressure: touch an unpinned object so something must be evicted.
        heap.evict(h);
      }
    } catch (const Error& e) {
      if (!expected_refusal(e.code())) throw;
    }

    // Pinned objects stay resident and address-stable, and are never offered
    // as victims.
    for (auto& g : readers) {
      auto m = heap.meta(g.handle());
      if (!m.resident || g.bytes().data() != heap.cache_buffer().data() + m.cache_offset) {
        violation("pinned reader object moved or evicted");
      }
    }
    for (auto& g : writers) {
      auto m = heap.meta(g.handle());
      if (!m.resident || g.bytes().data() != heap.cache_buffer().data() + m.cache_offset) {
        violation("pinned writer object moved or evicted");
      }
    }
    const auto pinned = pinned_ids();
    auto check_victims = [&](auto&& choose) {
      try {
        for (const auto& v : choose()) {
          if (std::find(pinned.begin(), pinned.end(), v.id) != pinned.end()) violation("pinned object chosen");
        }
      } catch (const Error&) {
      }
    };
    check_victims([&] { return heap.choose_cache_victims(1 + rng() % config.cache_size_bytes); });
    check_victims([&] { return heap.choose_dirty_victims(1 + rng() % config.max_modified_state_bytes); });
    ++stats.attempts;
    if (dead_readers.size() > 64) dead_readers.erase(dead_readers.begin());
    if (dead_writers.size() > 64) dead_writers.erase(dead_writers.begin());
  }
  return stats;
}

namespace {

// Random mutations recorded in `shadow`, keyed by object id.
void crash_trace(VnvHeap& heap, std::mt19937_64& rng, Contents& shadow, std::size_t steps) {
  for (std::size_t i = 0; i < steps; ++i) {
    const unsigned op = rng() % 10;
    try {
      if (op < 3 || shadow.empty()) {
        auto data = random_bytes(rng, 1 + rng() % 300);
        auto h = heap.alloc(data);
        shadow[h.id()] = std::move(data);
      } else if (op < 4) {
        auto it = std::next(shadow.begin(), static_cast<long>(rng() % shadow.size()));
        heap.dealloc(heap.handle_for(it->first));
        shadow.erase(it);
      } else if (op < 8) {
        auto it = std::next(shadow.begin(), static_cast<long>(rng() % shadow.size()));
        auto w = heap.get_mut(heap.handle_for(it->first));
        auto b = w.bytes();
        const std::size_t at = rng() % b.size();
        const std::size_t len = std::min<std::size_t>(b.size() - at, 1 + rng() % 64);
        for (std::size_t j = 0; j < len; ++j) b[at + j] = static_cast<std::byte>(rng());
        std::copy(b.begin(), b.end(), it->second.begin());
      } else {
        auto it = std::next(shadow.begin(), static_cast<long>(rng() % shadow.size()));
        heap.evict(heap.handle_for(it->first));
      }
    } catch (const Error& e) {
      if (!expected_refusal(e.code())) throw;
    }
  }
}

std::string compare(VnvHeap& heap, const Contents& shadow) {
  const auto handles = heap.handles();
  if (handles.size() != shadow.size()) {
    return "object count " + std::to_string(handles.size()) + " != " + std::to_string(shadow.size());
  }
  for (const auto& [id, data] : shadow) {
    auto g = heap.get_ref(heap.handle_for(id));
    if (!std::equal(g.bytes().begin(), g.bytes().end(), data.begin(), data.end())) {
      return "object " + std::to_string(id) + " differs";
    }
  }
  return {};
}

}  // namespace

CrashReport run_crash_suite(std::uint64_t seed, std::size_t iterations, const HeapConfig& config) {
  CrashReport report;
  const std::uint64_t bound = persist_bound(config);
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::uint64_t iter_seed = seed * 1000003ULL + it;
    ++report.iterations;
    std::string failure;
    try {
      std::mt19937_64 rng(iter_seed);
      SimulatedNvm nvm;
      Contents shadow;
      {
        VnvHeap heap(nvm, config);
        // Every tenth iteration checkpoints an empty heap.
        if (it % 10 != 0) crash_trace(heap, rng, shadow, 50 + rng() % 250);
        nvm.arm_power_failure(bound);
        heap.persist();
      }
      for (int cycle = 0; cycle < 3 && failure.empty(); ++cycle) {
        nvm.disarm_power_failure();
        auto heap = VnvHeap::restore(nvm);
        failure = compare(heap, shadow);
        if (!failure.empty()) break;
        crash_trace(heap, rng, shadow, rng() % 200);
        nvm.arm_power_failure(bound);
        heap.persist();
      }
      if (failure.empty()) {
        nvm.disarm_power_failure();
        auto heap = VnvHeap::restore(nvm);
        failure = compare(heap, shadow);
      }
    } catch (const Error& e) {
      failure = e.what();
    }
    if (failure.empty()) {
      ++report.passed;
    } else {
      report.failures.push_back("seed " + std::to_string(iter_seed) + ": " + failure);
    }
  }

  // One fault budget short of the bound under a saturating trace.
  SimulatedNvm nvm;
  HeapConfig sat;
  sat.cache_size_bytes = 4096;
  sat.max_modified_state_bytes = 2048;
  Contents previous;
  try {
    VnvHeap heap(nvm, sat);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 4; ++i) {
      auto data = random_bytes(rng, 488);
      previous[heap.alloc(data).id()] = data;
    }
    heap.persist();
    for (const auto& [id, data] : previous) {
      auto w = heap.get_mut(heap.handle_for(id));
      std::fill(w.bytes().begin(), w.bytes().end(), std::byte{0xEE});
    }
    nvm.arm_power_failure(persist_bound(sat) - 1);
    try {
      heap.persist();
    } catch (const Error& e) {
      report.fault_caught = e.code() == ErrorCode::kPowerFailureInjected;
    }
    nvm.disarm_power_failure();
    auto back = VnvHeap::restore(nvm);
    const auto diff = compare(back, previous);
    report.previous_restored = diff.empty();
    if (!diff.empty()) report.failures.push_back("bound-1 restore: " + diff);
  } catch (const Error& e) {
    report.failures.push_back(std::string("bound-1 scenario: ") + e.what());
  }
  return report;
}

double unequal_total_variation(std::size_t draws, std::uint64_t seed) {
  const std::size_t n = 256;
  const auto keys = gen_access_sequence(PatternKind::kUnequal, n, draws, seed);
  std::vector<double> counts(n, 0.0);
  for (Key k : keys) counts[k] += 1.0;
  const auto weights = unequal_weights(n);
  double total = 0;
  for (double w : weights) total += w;
  double tv = 0;
  for (std::size_t k = 0; k < n; ++k) tv += std::abs(counts[k] / static_cast<double>(draws) - weights[k] / total);
  return tv / 2;
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  HeapConfig config;
  config.cache_size_bytes = 4096;
  config.max_modified_state_bytes = 2048;

  std::size_t dirty_violations = 0, bound_violations = 0, persists = 0, ops = 0;
  std::uint64_t max_words = 0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const auto s = run_heap_trace(seed + t, 10000, config);
    dirty_violations += s.dirty_violations;
    bound_violations += s.bound_violations;
    persists += s.persists;
    ops += s.operations;
    max_words = std::max(max_words, s.max_persist_words);
  }
  std::ostringstream d1, d2;
  d1 << ops << " operations over 10 traces, " << dirty_violations << " violations";
  out.push_back({"dirty-limit invariant", dirty_violations == 0, d1.str()});
  d2 << persists << " persists, max " << max_words << " words, bound " << persist_bound(config) << ", "
     << bound_violations << " violations";
  out.push_back({"persist bound", bound_violations == 0 && persists > 0, d2.str()});

  const auto guards = run_guard_contract(seed, 10000);
  std::ostringstream d3;
  d3 << guards.attempts << " attempts, " << guards.violations << " violations";
  for (const auto& m : guards.messages) d3 << "; " << m;
  out.push_back({"guard contract", guards.violations == 0, d3.str()});

  const auto crash = run_crash_suite(seed, 100);
  std::ostringstream d4;
  d4 << crash.passed << "/" << crash.iterations << " iterations, bound-1 fault "
     << (crash.fault_caught ? "caught" : "missed") << ", previous checkpoint "
     << (crash.previous_restored ? "restored" : "lost");
  for (const auto& f : crash.failures) d4 << "; " << f;
  out.push_back({"crash suite",
                 crash.passed == crash.iterations && crash.fault_caught && crash.previous_restored, d4.str()});

  const double tv = unequal_total_variation(1000000, seed);
  std::ostringstream d5;
  d5 << "total variation " << tv;
  out.push_back({"unequal pattern statistics", tv < 0.01, d5.str()});
  return out;
}

}  // namespace vnv::bench
