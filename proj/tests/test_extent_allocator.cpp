#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vnv/error.hpp"

using namespace vnv;

TEST_CASE("first fit with 4-byte granularity") {
  ExtentAllocator a(100, 64);
  CHECK(*a.allocate(5) == 100);
  CHECK(*a.allocate(4) == 108);
  CHECK(a.allocation_size(100) == 8);
  CHECK(a.free_bytes() == 52);
  a.free(100);
  CHECK(*a.allocate(3) == 100);
  CHECK_FALSE(a.allocate(100).has_value());
  CHECK(oracle::tiling_error(a).empty());
}

TEST_CASE("freeing coalesces with both neighbours") {
  ExtentAllocator a(0, 48);
  auto x = *a.allocate(16), y = *a.allocate(16), z = *a.allocate(16);
  a.free(x);
  a.free(z);
  CHECK(a.free_extents().size() == 2);
  a.free(y);
  REQUIRE(a.free_extents().size() == 1);
  CHECK(a.free_extents()[0] == Extent{0, 48});
  CHECK_THROWS_AS(a.free(y), Error);
}

TEST_CASE("allocate_at claims exact ranges only when free") {
  ExtentAllocator a(0, 64);
  CHECK(a.allocate_at(20, 8));
  CHECK_FALSE(a.allocate_at(24, 4));
  CHECK_FALSE(a.allocate_at(60, 8));
  CHECK(a.allocate_at(0, 20));
  CHECK(*a.allocate(4) == 28);
  CHECK(oracle::tiling_error(a).empty());
}

TEST_CASE("random alloc/free keeps the region tiled") {
  std::mt19937 rng(7);
  ExtentAllocator a(64, 4096);
  std::vector<std::size_t> live;
  for (int i = 0; i < 5000; ++i) {
    if (live.empty() || rng() % 3 != 0) {
      if (auto off = a.allocate(1 + rng() % 200)) live.push_back(*off);
    } else {
      std::size_t k = rng() % live.size();
      a.free(live[k]);
      live.erase(live.begin() + static_cast<long>(k));
    }
    REQUIRE(oracle::tiling_error(a).empty());
  }
}
