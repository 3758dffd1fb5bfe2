#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vnv/error.hpp"
#include "vnv/persistence.hpp"

using namespace vnv;

namespace {

HeapConfig config_of(std::size_t cache, std::size_t limit) {
  HeapConfig c;
  c.cache_size_bytes = cache;
  c.max_modified_state_bytes = limit;
  return c;
}

std::vector<std::byte> fill(std::size_t n, int v) { return std::vector<std::byte>(n, std::byte(v)); }

// Mutates a few objects, allocates and frees some, evicts others.
void churn(VnvHeap& heap, std::mt19937& rng, std::vector<ObjectHandle>& live, int steps) {
  for (int i = 0; i < steps; ++i) {
    try {
      const unsigned op = rng() % 6;
      if (op == 0 || live.empty()) {
        live.push_back(heap.alloc(fill(1 + rng() % 200, static_cast<int>(rng() % 256))));
      } else if (op == 1 && live.size() > 2) {
        auto k = rng() % live.size();
        heap.dealloc(live[k]);
        live.erase(live.begin() + static_cast<long>(k));
      } else if (op == 2) {
        heap.evict(live[rng() % live.size()]);
      } else {
        auto w = heap.get_mut(live[rng() % live.size()]);
        w.bytes()[rng() % w.bytes().size()] = static_cast<std::byte>(rng());
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kPowerFailureInjected) throw;
    }
  }
}

// Contents as seen through a fresh restore; leaves the device untouched apart
// from the restore's own directory maintenance.
oracle::Shadow restored_contents(StorageDevice& nvm) {
  auto heap = restore(nvm);
  return oracle::snapshot(heap);
}

}  // namespace

TEST_CASE("persist bound and energy arithmetic") {
  CHECK(persist_bound(config_of(4096, 2048)) == 516);
  CHECK(persist_bound(config_of(4096, 4096)) == 1028);
  CHECK(persist_bound(config_of(4096, 1001)) == 255);
  CHECK(wcec_mj(516) == doctest::Approx(0.068112));
  CHECK(wcec_mj(1000, EnergyModel{100.0, 2.0}) == doctest::Approx(0.2));
  CHECK(transfer_time_us(7, EnergyModel{1.0, 0.5}) == doctest::Approx(3.5));
}

TEST_CASE("saturated persist costs exactly the bound") {
  SimulatedNvm nvm;
  const auto cfg = config_of(4096, 2048);
  VnvHeap heap(nvm, cfg);
  for (int i = 0; i < 4; ++i) heap.alloc(fill(488, i));
  REQUIRE(heap.stats().dirty_bytes == 2048);
  nvm.arm_power_failure(persist_bound(cfg));
  auto report = heap.persist();
  CHECK(report.words_transferred == persist_bound(cfg));
  CHECK(report.objects_synced == 4);
  CHECK(heap.stats().dirty_bytes == 16 + 4 * 20);
}

TEST_CASE("empty heap persists and restores") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, config_of(1024, 512));
  CHECK(heap.persist().words_transferred == 3 + 4 + 1);
  auto back = restore(nvm);
  CHECK(back.stats().object_count == 0);
  CHECK(back.config().cache_size_bytes == 1024);
  CHECK(back.persist_sequence() == 1);
}

TEST_CASE("restore without a committed checkpoint") {
  SimulatedNvm blank;
  CHECK_THROWS_WITH_AS(restore(blank), doctest::Contains("no heap"), Error);
  SimulatedNvm nvm;
  VnvHeap heap(nvm, config_of(1024, 512));
  heap.alloc(fill(10, 1));
  try {
    restore(nvm);
    FAIL("restore should fail");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoValidCheckpoint);
  }
}

TEST_CASE("restore brings back contents, pins and cache addresses") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, config_of(2048, 1024));
  std::mt19937 rng(3);
  std::vector<ObjectHandle> live;
  churn(heap, rng, live, 300);
  auto expected = oracle::snapshot(heap);
  auto pinned = heap.get_ref(live.back());
  const auto pinned_meta = heap.meta(live.back());
  heap.persist();

  auto back = restore(nvm);
  auto handle = back.handle_for(pinned_meta.id);
  auto m = back.meta(handle);
  CHECK(m.resident);
  CHECK_FALSE(m.pinned);
  CHECK(m.cache_offset == pinned_meta.cache_offset);
  CHECK(back.resident_ids() == std::vector<ObjectId>{pinned_meta.id});
  CHECK(back.stats().dirty_bytes == 16 + 20);
  CHECK(std::equal(back.cache_buffer().begin() + static_cast<long>(m.cache_offset),
                   back.cache_buffer().begin() + static_cast<long>(m.cache_offset + m.size_bytes),
                   expected[pinned_meta.id].begin()));
  CHECK(oracle::snapshot(back) == expected);
  CHECK(oracle::tiling_error(back.nvm_allocator()).empty());
  CHECK_THROWS_AS(back.get_ref(live.front()), Error);
}

TEST_CASE("restored heap keeps working across further checkpoints") {
  SimulatedNvm nvm;
  std::mt19937 rng(5);
  {
    VnvHeap heap(nvm, config_of(2048, 1024));
    std::vector<ObjectHandle> live;
    churn(heap, rng, live, 200);
    heap.persist();
  }
  for (int round = 0; round < 5; ++round) {
    auto heap = restore(nvm);
    auto live = heap.handles();
    churn(heap, rng, live, 200);
    auto expected = oracle::snapshot(heap);
    heap.persist();
    CHECK(restored_contents(nvm) == expected);
  }
}

TEST_CASE("a failed persist leaves the previous checkpoint intact at every cut point") {
  const auto cfg = config_of(2048, 1024);
  for (std::uint64_t cut = 0;; ++cut) {
    SimulatedNvm nvm;
    VnvHeap heap(nvm, cfg);
    std::mt19937 rng(17);
    std::vector<ObjectHandle> live;
    churn(heap, rng, live, 150);
    heap.persist();
    const auto before = oracle::snapshot(heap);
    churn(heap, rng, live, 150);
    const auto after = oracle::snapshot(heap);

    nvm.arm_power_failure(cut);
    bool finished = true;
    try {
      heap.persist();
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::kPowerFailureInjected);
      finished = false;
    }
    nvm.disarm_power_failure();
    const auto seen = restored_contents(nvm);
    if (finished) {
      CHECK(seen == after);
      break;
    }
    REQUIRE(seen == before);
    // Restoring twice must not disturb the surviving checkpoint either.
    REQUIRE(restored_contents(nvm) == before);
  }
}

TEST_CASE("failures during ordinary operation never damage the checkpoint") {
  for (int seed = 0; seed < 40; ++seed) {
    SimulatedNvm nvm;
    VnvHeap heap(nvm, config_of(1024, 512));
    std::mt19937 rng(seed);
    std::vector<ObjectHandle> live;
    churn(heap, rng, live, 100);
    heap.persist();
    const auto before = oracle::snapshot(heap);
    nvm.arm_power_failure(rng() % 400);
    try {
      churn(heap, rng, live, 400);
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::kPowerFailureInjected);
    }
    nvm.disarm_power_failure();
    REQUIRE(restored_contents(nvm) == before);
  }
}

TEST_CASE("checkpoint survives a process restart on a file-backed device") {
  auto path = std::filesystem::temp_directory_path() / "vnv_persist_test.img";
  std::filesystem::remove(path);
  oracle::Shadow expected;
  {
    FileBackedNvm dev(path, 256 * 1024);
    VnvHeap heap(dev, config_of(4096, 2048));
    std::mt19937 rng(23);
    std::vector<ObjectHandle> live;
    churn(heap, rng, live, 200);
    expected = oracle::snapshot(heap);
    heap.persist();
  }
  {
    FileBackedNvm dev(path, 256 * 1024);
    CHECK(restored_contents(dev) == expected);
  }
  std::filesystem::remove(path);
}
