#include <random>
#include <set>

#include "doctest.h"
#include "vnv/baselines.hpp"
#include "vnv/error.hpp"

using namespace vnv;

TEST_CASE("ManagedState page accounting") {
  SimulatedNvm nvm;
  SUBCASE("one byte written dirties a whole page") {
    ManagedStatePool pool(nvm, 4096, 512, 4);
    pool.ms_close(pool.ms_open(10, 1, AccessMode::kWrite));
    CHECK(pool.dirty_page_count() == 1);
    nvm.reset_cost_meter();
    CHECK(pool.ms_checkpoint() == 128 + 2 + 1);
  }
  SUBCASE("read access adds nothing") {
    ManagedStatePool pool(nvm, 4096, 64, 4);
    auto t = pool.ms_open(0, 300, AccessMode::kRead);
    CHECK(pool.dirty_page_count() == 0);
    CHECK_THROWS_AS(pool.write_view(t), Error);
    pool.ms_close(t);
  }
  SUBCASE("a write straddling a boundary dirties both pages") {
    ManagedStatePool pool(nvm, 4096, 128, 4);
    pool.ms_close(pool.ms_open(127, 2, AccessMode::kWrite));
    CHECK(pool.dirty_pages() == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("double close is detected") {
    ManagedStatePool pool(nvm, 4096, 128, 4);
    auto t = pool.ms_open(0, 4, AccessMode::kWrite);
    pool.ms_close(t);
    CHECK_THROWS_AS(pool.ms_close(t), Error);
    CHECK(pool.page_dirty(0));
  }
  SUBCASE("clean checkpoint writes metadata only") {
    ManagedStatePool pool(nvm, 59392, 32, 4);
    CHECK(pool.metadata_bytes() == 1856);
    nvm.reset_cost_meter();
    CHECK(pool.ms_checkpoint() == 464 + 1);
  }
  CHECK_THROWS_AS(ManagedStatePool(nvm, 4096, 100, 4), Error);
}

TEST_CASE("ManagedState writes back the least recently dirtied page") {
  SimulatedNvm nvm;
  ManagedStatePool pool(nvm, 1024, 32, 2);
  pool.ms_close(pool.ms_open(0, 1, AccessMode::kWrite));   // page 0
  pool.ms_close(pool.ms_open(32, 1, AccessMode::kWrite));  // page 1
  pool.ms_close(pool.ms_open(0, 1, AccessMode::kWrite));   // page 0 refreshed
  nvm.reset_cost_meter();
  pool.ms_close(pool.ms_open(64, 1, AccessMode::kWrite));  // evicts page 1
  CHECK(nvm.cost_meter().words_written == 8);
  CHECK(pool.dirty_pages() == std::vector<std::size_t>{0, 2});
}

TEST_CASE("ManagedState dirty set matches an independent bitmap oracle") {
  SimulatedNvm nvm;
  const std::size_t page = 64, limit = 6;
  ManagedStatePool pool(nvm, 8192, page, limit);
  std::mt19937 rng(1);
  std::vector<std::size_t> order;  // oracle: pages in dirtying order
  for (int i = 0; i < 20000; ++i) {
    const std::size_t off = rng() % 8000;
    const std::size_t len = 1 + rng() % 150;
    const bool write = rng() % 2;
    pool.ms_close(pool.ms_open(off, len, write ? AccessMode::kWrite : AccessMode::kRead));
    if (write) {
      for (std::size_t p = off / page; p <= (off + len - 1) / page; ++p) {
        auto it = std::find(order.begin(), order.end(), p);
        if (it != order.end()) {
          order.erase(it);
        } else if (order.size() == limit) {
          order.erase(order.begin());
        }
        order.push_back(p);
      }
    }
    REQUIRE(pool.dirty_page_count() <= limit);
    REQUIRE(pool.dirty_pages() == order);
    if (i % 997 == 0) {
      nvm.reset_cost_meter();
      const auto words = pool.ms_checkpoint();
      REQUIRE(words == order.size() * 16 + 32 + 1);
      REQUIRE(words <= pool.checkpoint_bound_words());
      order.clear();
    }
  }
}

TEST_CASE("ManagedState page limit for a byte budget") {
  CHECK(ManagedStatePool::page_limit_for_budget(11878, 59392, 32) == 313);
  CHECK(ManagedStatePool::page_limit_for_budget(11878, 59392, 512) == 22);
  CHECK(ManagedStatePool::page_limit_for_budget(100, 59392, 512) == 0);
}

TEST_CASE("module swapping") {
  SimulatedNvm nvm;
  ModuleSwapApp app(nvm, 3);
  CHECK(app.module_access(0, 0, 32, AccessMode::kRead) == 0);
  CHECK(app.module_access(1, 0, 32, AccessMode::kRead) == 512);
  CHECK(app.module_access(0, 992, 32, AccessMode::kWrite) == 512);
  CHECK(app.module_access(0, 0, 1024, AccessMode::kRead) == 0);
  CHECK_THROWS_AS(app.module_access(3, 0, 1, AccessMode::kRead), Error);
  CHECK_THROWS_AS(app.module_access(0, 1000, 32, AccessMode::kRead), Error);
}

TEST_CASE("module contents survive swapping") {
  SimulatedNvm nvm;
  ModuleSwapApp app(nvm, 2, 64);
  app.ram()[5] = std::byte{9};
  app.module_access(1, 0, 1, AccessMode::kWrite);
  app.ram()[5] = std::byte{1};
  app.module_access(0, 0, 1, AccessMode::kRead);
  CHECK(app.ram()[5] == std::byte{9});
}

TEST_CASE("unmanaged RAM checkpoint copies everything") {
  SimulatedNvm nvm;
  for (std::size_t ram : {4096u, 8192u, 16384u, 32768u, 1001u}) {
    UnmanagedRam r(nvm, ram);
    nvm.reset_cost_meter();
    CHECK(r.checkpoint() == (ram + 3) / 4);
    CHECK(UnmanagedRam::checkpoint_words(ram) == (ram + 3) / 4);
  }
}
