#include <cstring>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vnv/error.hpp"
#include "vnv/heap.hpp"

using namespace vnv;

namespace {

std::vector<std::byte> bytes_of(std::size_t n, int fill) { return std::vector<std::byte>(n, std::byte(fill)); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kIo;
}

HeapConfig small_config(std::size_t cache = 4096, std::size_t limit = 2048) {
  HeapConfig c;
  c.cache_size_bytes = cache;
  c.max_modified_state_bytes = limit;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  SimulatedNvm nvm;
  CHECK(code_of([&] { VnvHeap(nvm, small_config(1024, 2048)); }) == ErrorCode::kConfigInvalid);
  CHECK(code_of([&] { VnvHeap(nvm, small_config(1024, 0)); }) == ErrorCode::kConfigInvalid);
  CHECK(code_of([&] { VnvHeap(nvm, small_config(1024, 39)); }) == ErrorCode::kConfigInvalid);
  CHECK_NOTHROW(VnvHeap(nvm, small_config(1024, 40)));
}

TEST_CASE("alloc and access never touch storage while the cache suffices") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, small_config());
  nvm.reset_cost_meter();
  auto h = heap.alloc(bytes_of(10, 3));
  CHECK(heap.state(h) == ObjectState{true, false, true});
  CHECK(heap.stats().dirty_bytes == 16 + 20 + 12);
  {
    auto w = heap.get_mut(h);
    w.bytes()[0] = std::byte{42};
    CHECK(heap.state(h).pinned);
  }
  auto r = heap.get_ref(h);
  CHECK(r.bytes()[0] == std::byte{42});
  CHECK(r.bytes()[9] == std::byte{3});
  CHECK(nvm.cost_meter().total() == 0);
}

TEST_CASE("sync, unload and reload costs") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, small_config());
  auto h = heap.alloc(bytes_of(32, 1));
  nvm.reset_cost_meter();
  CHECK(heap.sync(h) == 8);
  CHECK_FALSE(heap.state(h).modified);
  CHECK(code_of([&] { heap.sync(h); }) == ErrorCode::kPreconditionViolated);
  heap.unload(h);
  CHECK(nvm.cost_meter().words_written == 8 + 5);
  CHECK(heap.stats().dirty_bytes == 16);
  nvm.reset_cost_meter();
  CHECK(heap.get_ref(h).bytes()[31] == std::byte{1});
  CHECK(nvm.cost_meter().words_read == 8);
  CHECK(nvm.cost_meter().words_written == 0);
}

TEST_CASE("unload of modified object is a precondition violation; evict syncs first") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, small_config());
  auto h = heap.alloc(bytes_of(8, 1));
  CHECK(code_of([&] { heap.unload(h); }) == ErrorCode::kPreconditionViolated);
  heap.evict(h);
  CHECK_FALSE(heap.state(h).resident);
}

TEST_CASE("guard contract") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, small_config());
  auto h = heap.alloc(bytes_of(16, 0));

  SUBCASE("second writable guard") {
    auto w = heap.get_mut(h);
    CHECK(code_of([&] { heap.get_mut(h); }) == ErrorCode::kGuardActive);
    CHECK(code_of([&] { heap.get_ref(h); }) == ErrorCode::kWriteGuardActive);
  }
  SUBCASE("writable guard while readers are live") {
    auto r1 = heap.get_ref(h);
    auto r2 = heap.get_ref(h);
    CHECK(heap.read_guard_count(h) == 2);
    CHECK(code_of([&] { heap.get_mut(h); }) == ErrorCode::kGuardActive);
    r1.release();
    CHECK(code_of([&] { heap.get_mut(h); }) == ErrorCode::kGuardActive);
    r2.release();
    CHECK_NOTHROW(heap.get_mut(h));
  }
  SUBCASE("use after release or move") {
    auto w = heap.get_mut(h);
    auto moved = std::move(w);
    CHECK_FALSE(w.live());
    CHECK(code_of([&] { (void)w.bytes(); }) == ErrorCode::kGuardReleased);
    moved.release();
    CHECK(code_of([&] { (void)moved.bytes(); }) == ErrorCode::kGuardReleased);
    moved.release();
    CHECK_FALSE(heap.write_guard_live(h));
  }
  SUBCASE("dealloc while pinned") {
    auto r = heap.get_ref(h);
    CHECK(code_of([&] { heap.dealloc(h); }) == ErrorCode::kStillPinned);
    CHECK(code_of([&] { heap.evict(h); }) == ErrorCode::kStillPinned);
  }
  SUBCASE("stale and foreign handles") {
    heap.dealloc(h);
    CHECK(code_of([&] { heap.get_ref(h); }) == ErrorCode::kInvalidHandle);
    auto h2 = heap.alloc(bytes_of(16, 0));
    CHECK(h2.id() == h.id());
    CHECK(code_of([&] { heap.dealloc(h); }) == ErrorCode::kInvalidHandle);
    SimulatedNvm other_nvm;
    VnvHeap other(other_nvm, small_config());
    CHECK(code_of([&] { other.get_ref(h2); }) == ErrorCode::kInvalidHandle);
    CHECK(code_of([&] { heap.get_ref(ObjectHandle{}); }) == ErrorCode::kInvalidHandle);
  }
}

TEST_CASE("typed access") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, small_config());
  struct Pair {
    std::uint32_t a, b;
  };
  auto h = heap.alloc_zeroed(sizeof(Pair));
  heap.get_mut(h).as<Pair>() = Pair{7, 9};
  CHECK(heap.get_ref(h).as<Pair>().b == 9);
  CHECK(code_of([&] { heap.get_ref(h).as<std::uint64_t[2]>(); }) == ErrorCode::kSizeMismatch);
  CHECK(code_of([&] { heap.get_mut(h).assign(bytes_of(3, 1)); }) == ErrorCode::kSizeMismatch);
}

TEST_CASE("size limits") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, small_config(1024, 512));
  CHECK(code_of([&] { heap.alloc_zeroed(1005); }) == ErrorCode::kObjectTooLarge);
  CHECK(code_of([&] { heap.alloc_zeroed(0); }) == ErrorCode::kInvalidArgument);
  nvm.reset_cost_meter();
  auto big = heap.alloc(bytes_of(1000, 5));
  CHECK(heap.state(big) == ObjectState{true, false, false});
  CHECK(nvm.cost_meter().words_written == 250);
  CHECK(heap.stats().dirty_bytes == 36);
  CHECK(code_of([&] { heap.get_mut(big); }) == ErrorCode::kDirtyBudgetUnsatisfiable);
  CHECK(heap.get_ref(big).bytes()[999] == std::byte{5});
}

TEST_CASE("eviction is FIFO by residency and skips pinned objects") {
  SimulatedNvm nvm;
  // Room for exactly three 100-byte objects, cache and dirty budget alike.
  VnvHeap heap(nvm, small_config(16 + 3 * 120, 16 + 3 * 120));
  auto a = heap.alloc(bytes_of(100, 1));
  auto b = heap.alloc(bytes_of(100, 2));
  auto c = heap.alloc(bytes_of(100, 3));
  CHECK(heap.choose_cache_victims(120) == std::vector<VnvHeap::Victim>{{a.id(), VnvHeap::VictimAction::kSyncAndUnload}});
  {
    auto pin = heap.get_ref(a);
    auto d = heap.alloc(bytes_of(100, 4));
    CHECK(heap.state(a).resident);
    CHECK_FALSE(heap.state(b).resident);
    CHECK(heap.resident_ids() == std::vector<ObjectId>{a.id(), c.id(), d.id()});
    auto pin_c = heap.get_ref(c);
    auto pin_d = heap.get_ref(d);
    CHECK(code_of([&] { heap.get_ref(b); }) == ErrorCode::kCachePressureUnresolvable);
    CHECK(code_of([&] { heap.choose_cache_victims(120); }) == ErrorCode::kCachePressureUnresolvable);
  }
  CHECK(heap.get_ref(b).bytes()[0] == std::byte{2});
  CHECK_FALSE(heap.state(a).resident);
}

TEST_CASE("dirty victims: sync modified first, then unload") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, small_config(4096, 16 + 3 * 20 + 2 * 100 + 8));
  auto a = heap.alloc(bytes_of(100, 1));
  auto b = heap.alloc(bytes_of(100, 2));
  auto c = heap.alloc(bytes_of(8, 3));
  CHECK(heap.stats().dirty_bytes == heap.config().max_modified_state_bytes);
  CHECK(heap.choose_dirty_victims(28) == std::vector<VnvHeap::Victim>{{a.id(), VnvHeap::VictimAction::kSync}});
  CHECK(heap.choose_dirty_victims(200) ==
        std::vector<VnvHeap::Victim>{{a.id(), VnvHeap::VictimAction::kSync}, {b.id(), VnvHeap::VictimAction::kSync}});
  CHECK(heap.choose_dirty_victims(228) ==
        std::vector<VnvHeap::Victim>{{a.id(), VnvHeap::VictimAction::kSyncAndUnload},
                                     {b.id(), VnvHeap::VictimAction::kSync},
                                     {c.id(), VnvHeap::VictimAction::kSync}});
  CHECK(code_of([&] { heap.choose_dirty_victims(1000); }) == ErrorCode::kDirtyBudgetUnsatisfiable);
  auto d = heap.alloc(bytes_of(8, 4));
  CHECK(heap.state(a) == ObjectState{true, false, false});
  CHECK(heap.state(d).modified);
  CHECK(heap.stats().dirty_bytes == oracle::expected_dirty(heap));
}

TEST_CASE("randomized trace keeps every invariant") {
  SimulatedNvm nvm;
  VnvHeap heap(nvm, small_config(2048, 1024));
  int observed = 0;
  bool bad_transition = false;
  heap.set_transition_observer([&](ObjectId, ObjectState, ObjectState to) {
    ++observed;
    if ((to.modified || to.pinned) && !to.resident) bad_transition = true;
  });
  std::mt19937 rng(11);
  oracle::Shadow shadow;
  std::vector<ObjectHandle> live;
  std::vector<ReadGuard> readers;
  for (int step = 0; step < 4000; ++step) {
    const unsigned op = rng() % 10;
    try {
      if (op < 3 || live.empty()) {
        auto data = bytes_of(1 + rng() % 300, static_cast<int>(rng() % 256));
        auto h = heap.alloc(data);
        live.push_back(h);
        shadow[h.id()] = data;
      } else if (op == 3) {
        auto k = rng() % live.size();
        heap.dealloc(live[k]);
        shadow.erase(live[k].id());
        live.erase(live.begin() + static_cast<long>(k));
      } else if (op < 6) {
        auto& h = live[rng() % live.size()];
        auto w = heap.get_mut(h);
        auto v = w.bytes();
        v[rng() % v.size()] = static_cast<std::byte>(rng());
        shadow[h.id()].assign(v.begin(), v.end());
      } else if (op < 8) {
        auto& h = live[rng() % live.size()];
        auto g = heap.get_ref(h);
        REQUIRE(std::equal(g.bytes().begin(), g.bytes().end(), shadow[h.id()].begin()));
        if (rng() % 4 == 0) readers.push_back(std::move(g));
      } else if (op == 8) {
        readers.clear();
      } else {
        heap.evict(live[rng() % live.size()]);
      }
    } catch (const Error& e) {
      const auto c = e.code();
      REQUIRE((c == ErrorCode::kStillPinned || c == ErrorCode::kGuardActive ||
               c == ErrorCode::kCachePressureUnresolvable || c == ErrorCode::kDirtyBudgetUnsatisfiable ||
               c == ErrorCode::kOutOfNvm));
    }
    REQUIRE(heap.stats().dirty_bytes <= 1024);
    REQUIRE(heap.stats().dirty_bytes == oracle::expected_dirty(heap));
    REQUIRE(oracle::cache_layout_error(heap).empty());
    REQUIRE(oracle::tiling_error(heap.nvm_allocator()).empty());
  }
  readers.clear();
  CHECK(oracle::snapshot(heap) == shadow);
  CHECK(observed > 0);
  CHECK_FALSE(bad_transition);
}
