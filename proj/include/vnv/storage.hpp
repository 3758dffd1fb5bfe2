#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace vnv {

inline constexpr std::size_t kWordBytes = 4;
inline constexpr std::size_t kDefaultNvmCapacity = 512 * 1024;

constexpr std::uint64_t words_for(std::size_t bytes) { return (bytes + kWordBytes - 1) / kWordBytes; }

/// Word-granular transfer counts. Only reset() moves the counters backwards.
struct CostMeter {
  std::uint64_t words_read = 0;
  std::uint64_t words_written = 0;

  std::uint64_t total() const { return words_read + words_written; }
  void reset() { *this = CostMeter{}; }
};

/// Armed power-failure plan: the transfer of word budget_words+1 fails.
struct FaultPlan {
  std::uint64_t budget_words = 0;
  bool tripped = false;
};

/// Block storage emulating per-word SPI transfers to FRAM. Each transfer of n
/// bytes is charged ceil(n/4) words; a failure can only happen between words.
class StorageDevice {
 public:
  explicit StorageDevice(std::size_t capacity_bytes) : capacity_(capacity_bytes) {}
  virtual ~StorageDevice() = default;

  StorageDevice(const StorageDevice&) = delete;
  StorageDevice& operator=(const StorageDevice&) = delete;

  std::size_t capacity() const { return capacity_; }

  void read(std::size_t offset, std::span<std::byte> out);
  std::vector<std::byte> read(std::size_t offset, std::size_t length);
  void write(std::size_t offset, std::span<const std::byte> data);

  const CostMeter& cost_meter() const { return meter_; }
  void reset_cost_meter() { meter_.reset(); }

  void arm_power_failure(std::uint64_t budget_words);
  /// Models the reboot after a power failure: the plan is removed.
  void disarm_power_failure() { fault_.reset(); }
  bool power_failure_armed() const { return fault_.has_value(); }
  std::optional<std::uint64_t> remaining_fault_budget() const;

 protected:
  virtual void do_read(std::size_t offset, std::span<std::byte> out) = 0;
  virtual void do_write(std::size_t offset, std::span<const std::byte> data) = 0;

 private:
  void check_range(std::size_t offset, std::size_t length) const;
  // Number of words of a transfer allowed to complete; throws after the caller
  // has applied them when the plan trips.
  std::uint64_t permitted_words(std::uint64_t words);

  std::size_t capacity_;
  CostMeter meter_;
  std::optional<FaultPlan> fault_;
};

/// In-memory NVM. Contents outlive any heap built on top of it, which is how a
/// reboot is simulated.
class SimulatedNvm final : public StorageDevice {
 public:
  explicit SimulatedNvm(std::size_t capacity_bytes = kDefaultNvmCapacity);

  std::span<const std::byte> bytes() const { return bytes_; }

 protected:
  void do_read(std::size_t offset, std::span<std::byte> out) override;
  void do_write(std::size_t offset, std::span<const std::byte> data) override;

 private:
  std::vector<std::byte> bytes_;
};

/// NVM backed by a raw byte image on disk (no header). Writes go straight to
/// the file so the image survives process restarts.
class FileBackedNvm final : public StorageDevice {
 public:
  FileBackedNvm(std::filesystem::path path, std::size_t capacity_bytes = kDefaultNvmCapacity);
  ~FileBackedNvm() override;

  const std::filesystem::path& path() const { return path_; }

 protected:
  void do_read(std::size_t offset, std::span<std::byte> out) override;
  void do_write(std::size_t offset, std::span<const std::byte> data) override;

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
};

}  // namespace vnv
