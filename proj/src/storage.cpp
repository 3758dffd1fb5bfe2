#include "vnv/storage.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "vnv/error.hpp"

namespace vnv {

void StorageDevice::check_range(std::size_t offset, std::size_t length) const {
  if (offset > capacity_ || length > capacity_ - offset) {
    throw Error(ErrorCode::kOutOfRange, "transfer [" + std::to_string(offset) + ", +" +
                                            std::to_string(length) + ") exceeds capacity " +
                                            std::to_string(capacity_));
  }
}

std::uint64_t StorageDevice::permitted_words(std::uint64_t words) {
  if (!fault_) return words;
  if (fault_->tripped) return 0;
  return std::min(words, fault_->budget_words);
}

void StorageDevice::arm_power_failure(std::uint64_t budget_words) {
  fault_ = FaultPlan{budget_words, false};
}

std::optional<std::uint64_t> StorageDevice::remaining_fault_budget() const {
  if (!fault_) return std::nullopt;
  return fault_->budget_words;
}

void StorageDevice::read(std::size_t offset, std::span<std::byte> out) {
  check_range(offset, out.size());
  const std::uint64_t words = words_for(out.size());
  const std::uint64_t allowed = permitted_words(words);
  const std::size_t bytes = std::min<std::size_t>(out.size(), allowed * kWordBytes);
  if (bytes > 0) do_read(offset, out.first(bytes));
  meter_.words_read += allowed;
  if (fault_) fault_->budget_words -= allowed;
  if (allowed < words) {
    fault_->tripped = true;
    throw Error(ErrorCode::kPowerFailureInjected, "read at offset " + std::to_string(offset));
  }
}

std::vector<std::byte> StorageDevice::read(std::size_t offset, std::size_t length) {
  std::vector<std::byte> out(length);
  read(offset, std::span<std::byte>(out));
  return out;
}

void StorageDevice::write(std::size_t offset, std::span<const std::byte> data) {
  check_range(offset, data.size());
  const std::uint64_t words = words_for(data.size());
  const std::uint64_t allowed = permitted_words(words);
  // Completed words are durable; the failing word is never touched.
  const std::size_t bytes = std::min<std::size_t>(data.size(), allowed * kWordBytes);
  if (bytes > 0) do_write(offset, data.first(bytes));
  meter_.words_written += allowed;
  if (fault_) fault_->budget_words -= allowed;
  if (allowed < words) {
    fault_->tripped = true;
    throw Error(ErrorCode::kPowerFailureInjected, "write at offset " + std::to_string(offset));
  }
}

SimulatedNvm::SimulatedNvm(std::size_t capacity_bytes)
    : StorageDevice(capacity_bytes), bytes_(capacity_bytes, std::byte{0}) {}

void SimulatedNvm::do_read(std::size_t offset, std::span<std::byte> out) {
  std::memcpy(out.data(), bytes_.data() + offset, out.size());
}

void SimulatedNvm::do_write(std::size_t offset, std::span<const std::byte> data) {
  std::memcpy(bytes_.data() + offset, data.data(), data.size());
}

FileBackedNvm::FileBackedNvm(std::filesystem::path path, std::size_t capacity_bytes)
    : StorageDevice(capacity_bytes), path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) {
    std::FILE* created = std::fopen(path_.c_str(), "wb");
    if (!created) throw Error(ErrorCode::kIo, "cannot create " + path_.string());
    std::fclose(created);
  }
  if (std::filesystem::file_size(path_) < capacity_bytes) {
    std::filesystem::resize_file(path_, capacity_bytes);
  }
  file_ = std::fopen(path_.c_str(), "r+b");
  if (!file_) throw Error(ErrorCode::kIo, "cannot open " + path_.string());
}

FileBackedNvm::~FileBackedNvm() {
  if (file_) std::fclose(file_);
}

void FileBackedNvm::do_read(std::size_t offset, std::span<std::byte> out) {
  if (std::fseek(file_, static_cast<long>(offset), SEEK_SET) != 0 ||
      std::fread(out.data(), 1, out.size(), file_) != out.size()) {
    throw Error(ErrorCode::kIo, "read failed on " + path_.string());
  }
}

void FileBackedNvm::do_write(std::size_t offset, std::span<const std::byte> data) {
  if (std::fseek(file_, static_cast<long>(offset), SEEK_SET) != 0 ||
      std::fwrite(data.data(), 1, data.size(), file_) != data.size() || std::fflush(file_) != 0) {
    throw Error(ErrorCode::kIo, "write failed on " + path_.string());
  }
}

}  // namespace vnv
