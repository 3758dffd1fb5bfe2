#include <filesystem>
#include <vector>

#include "doctest.h"
#include "vnv/error.hpp"
#include "vnv/storage.hpp"

using namespace vnv;

namespace {

std::vector<std::byte> pattern(std::size_t n, int seed = 1) {
  std::vector<std::byte> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::byte>((i * 7 + seed) & 0xFF);
  return v;
}

}  // namespace

TEST_CASE("word cost is ceil(len / 4)") {
  // Hand-written table rather than the formula under test.
  const std::pair<std::size_t, std::uint64_t> table[] = {{0, 0}, {1, 1}, {3, 1}, {4, 1}, {5, 2},
                                                         {8, 2}, {9, 3}, {255, 64}, {256, 64}, {1024, 256}};
  for (auto [bytes, words] : table) {
    CHECK(words_for(bytes) == words);
    SimulatedNvm nvm(4096);
    nvm.write(0, pattern(bytes));
    CHECK(nvm.cost_meter().words_written == words);
    nvm.read(0, bytes);
    CHECK(nvm.cost_meter().words_read == words);
  }
}

TEST_CASE("reads return what was written and out-of-range transfers fail") {
  SimulatedNvm nvm(64);
  auto data = pattern(10);
  nvm.write(50, data);
  CHECK(nvm.read(50, 10) == data);
  CHECK_THROWS_AS(nvm.write(60, pattern(5)), Error);
  CHECK_THROWS_AS(nvm.read(63, 2), Error);
  try {
    nvm.read(100, 1);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfRange);
  }
  CHECK(nvm.cost_meter().total() == 3 + 3);
}

TEST_CASE("power failure completes exactly the budgeted words") {
  SimulatedNvm nvm(64);
  nvm.arm_power_failure(2);
  auto data = pattern(12, 9);
  try {
    nvm.write(0, data);
    FAIL("expected injected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPowerFailureInjected);
  }
  auto bytes = nvm.bytes();
  for (std::size_t i = 0; i < 8; ++i) CHECK(bytes[i] == data[i]);
  for (std::size_t i = 8; i < 12; ++i) CHECK(bytes[i] == std::byte{0});
  CHECK(nvm.cost_meter().words_written == 2);

  SUBCASE("every later transfer fails until the reboot") {
    CHECK_THROWS_AS(nvm.read(0, 4), Error);
    CHECK_THROWS_AS(nvm.write(0, pattern(1)), Error);
    nvm.disarm_power_failure();
    CHECK_NOTHROW(nvm.write(0, pattern(4)));
  }
}

TEST_CASE("budget equal to the transfer size does not trip") {
  SimulatedNvm nvm(64);
  nvm.arm_power_failure(3);
  nvm.write(0, pattern(12));
  CHECK(nvm.remaining_fault_budget() == 0u);
  CHECK_THROWS_AS(nvm.write(0, pattern(1)), Error);
  SimulatedNvm other(64);
  other.arm_power_failure(0);
  CHECK_NOTHROW(other.write(0, {}));
}

TEST_CASE("file-backed device survives reopening") {
  auto path = std::filesystem::temp_directory_path() / "vnv_storage_test.img";
  std::filesystem::remove(path);
  auto data = pattern(33, 4);
  {
    FileBackedNvm dev(path, 1024);
    dev.write(100, data);
  }
  CHECK(std::filesystem::file_size(path) == 1024);
  {
    FileBackedNvm dev(path, 1024);
    CHECK(dev.read(100, 33) == data);
    CHECK(dev.cost_meter().words_read == 9);
  }
  std::filesystem::remove(path);
}
