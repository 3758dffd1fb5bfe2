#include "vnv/baselines.hpp"

#include <algorithm>
#include <string>

#include "vnv/error.hpp"
#include "vnv/extent_allocator.hpp"

namespace vnv {

ManagedStatePool::ManagedStatePool(StorageDevice& storage, std::size_t ram_bytes, std::size_t page_size,
                                   std::size_t dirty_page_limit, std::size_t storage_offset)
    : storage_(&storage),
      page_size_(page_size),
      dirty_page_limit_(dirty_page_limit),
      storage_offset_(storage_offset),
      ram_(ram_bytes, std::byte{0}) {
  if (!valid_page_size(page_size)) {
    throw Error(ErrorCode::kConfigInvalid, "unsupported page size " + std::to_string(page_size));
  }
  if (ram_bytes == 0 || dirty_page_limit == 0) throw Error(ErrorCode::kConfigInvalid, "empty pool");
  const std::size_t pages = (ram_bytes + page_size - 1) / page_size;
  dirty_.assign(pages, 0);
  lrd_pos_.resize(pages);
  const std::size_t footprint = ExtentAllocator::align(ram_bytes) + ExtentAllocator::align(pages) + kHeaderBytes;
  if (storage_offset + footprint > storage.capacity()) {
    throw Error(ErrorCode::kOutOfNvm, "pool does not fit the device");
  }
}

bool ManagedStatePool::valid_page_size(std::size_t page_size) {
  return page_size == 32 || page_size == 64 || page_size == 128 || page_size == 256 || page_size == 512;
}

std::size_t ManagedStatePool::page_limit_for_budget(std::size_t budget_bytes, std::size_t data_bytes,
                                                    std::size_t page_size) {
  const std::size_t metadata = (data_bytes + page_size - 1) / page_size;
  if (budget_bytes <= metadata) return 0;
  return (budget_bytes - metadata) / page_size;
}

const ManagedStatePool::OpenRegion& ManagedStatePool::region(Token token) const {
  if (token.id >= regions_.size() || !regions_[token.id].live) {
    throw Error(ErrorCode::kGuardReleased, "access token is not open");
  }
  return regions_[token.id];
}

bool ManagedStatePool::page_open_for_write(std::size_t page) const {
  const std::size_t begin = page * page_size_;
  const std::size_t end = begin + page_size_;
  return std::any_of(regions_.begin(), regions_.end(), [&](const OpenRegion& r) {
    return r.live && r.mode == AccessMode::kWrite && r.offset < end && r.offset + r.length > begin;
  });
}

void ManagedStatePool::write_back(std::size_t page) {
  const std::size_t begin = page * page_size_;
  const std::size_t len = std::min(page_size_, ram_.size() - begin);
  storage_->write(storage_offset_ + begin, std::span<const std::byte>(ram_.data() + begin, len));
  dirty_[page] = 0;
  lrd_.erase(lrd_pos_[page]);
}

void ManagedStatePool::mark_dirty(std::size_t page) {
  if (dirty_[page]) {
    lrd_.splice(lrd_.end(), lrd_, lrd_pos_[page]);
    return;
  }
  while (lrd_.size() >= dirty_page_limit_) {
    auto victim = std::find_if(lrd_.begin(), lrd_.end(), [&](std::size_t p) { return !page_open_for_write(p); });
    if (victim == lrd_.end()) {
      throw Error(ErrorCode::kDirtyBudgetUnsatisfiable, "every dirty page is open for writing");
    }
    write_back(*victim);
  }
  dirty_[page] = 1;
  lrd_pos_[page] = lrd_.insert(lrd_.end(), page);
}

ManagedStatePool::Token ManagedStatePool::ms_open(std::size_t offset, std::size_t length, AccessMode mode) {
  if (length == 0 || offset > ram_.size() || length > ram_.size() - offset) {
    throw Error(ErrorCode::kOutOfRange, "region outside the pool");
  }
  if (mode == AccessMode::kWrite) {
    const std::size_t first = offset / page_size_;
    const std::size_t last = (offset + length - 1) / page_size_;
    if (last - first + 1 > dirty_page_limit_) {
      throw Error(ErrorCode::kDirtyBudgetUnsatisfiable, "region spans more pages than the dirty limit");
    }
    for (std::size_t p = first; p <= last; ++p) mark_dirty(p);
  }
  auto slot = std::find_if(regions_.begin(), regions_.end(), [](const OpenRegion& r) { return !r.live; });
  if (slot == regions_.end()) slot = regions_.insert(regions_.end(), OpenRegion{});
  *slot = OpenRegion{true, offset, length, mode};
  return Token{static_cast<std::uint32_t>(slot - regions_.begin())};
}

void ManagedStatePool::ms_close(Token token) {
  region(token);
  regions_[token.id].live = false;
}

std::span<const std::byte> ManagedStatePool::read_view(Token token) const {
  const OpenRegion& r = region(token);
  return {ram_.data() + r.offset, r.length};
}

std::span<std::byte> ManagedStatePool::write_view(Token token) {
  const OpenRegion& r = region(token);
  if (r.mode != AccessMode::kWrite) throw Error(ErrorCode::kPreconditionViolated, "token is read-only");
  return {ram_.data() + r.offset, r.length};
}

std::uint64_t ManagedStatePool::ms_checkpoint() {
  const std::uint64_t start = storage_->cost_meter().total();
  while (!lrd_.empty()) write_back(lrd_.front());
  const std::size_t bitmap_offset = storage_offset_ + ExtentAllocator::align(ram_.size());
  std::vector<std::byte> bitmap(dirty_.size(), std::byte{0});
  storage_->write(bitmap_offset, bitmap);
  ++checkpoints_;
  const std::byte header[kHeaderBytes] = {
      static_cast<std::byte>(checkpoints_), static_cast<std::byte>(checkpoints_ >> 8),
      static_cast<std::byte>(checkpoints_ >> 16), static_cast<std::byte>(checkpoints_ >> 24)};
  storage_->write(bitmap_offset + ExtentAllocator::align(dirty_.size()), header);
  return storage_->cost_meter().total() - start;
}

std::uint64_t ManagedStatePool::checkpoint_bound_words() const {
  return dirty_page_limit_ * words_for(page_size_) + words_for(page_count()) + words_for(kHeaderBytes);
}

ModuleSwapApp::ModuleSwapApp(StorageDevice& storage, std::size_t module_count, std::size_t module_bytes,
                             std::size_t storage_offset)
    : storage_(&storage), module_count_(module_count), storage_offset_(storage_offset), ram_(module_bytes) {
  if (module_count == 0 || module_bytes == 0) throw Error(ErrorCode::kConfigInvalid, "empty application");
  if (storage_offset + module_count * module_bytes > storage.capacity()) {
    throw Error(ErrorCode::kOutOfNvm, "modules do not fit the device");
  }
}

std::uint64_t ModuleSwapApp::module_access(std::size_t target, std::size_t offset, std::size_t length,
                                           AccessMode) {
  if (target >= module_count_) throw Error(ErrorCode::kOutOfRange, "no such module");
  if (offset > ram_.size() || length > ram_.size() - offset) {
    throw Error(ErrorCode::kOutOfRange, "object outside its module");
  }
  if (target == active_) return 0;
  const std::uint64_t start = storage_->cost_meter().total();
  storage_->write(storage_offset_ + active_ * ram_.size(), ram_);
  storage_->read(storage_offset_ + target * ram_.size(), std::span<std::byte>(ram_));
  active_ = target;
  return storage_->cost_meter().total() - start;
}

UnmanagedRam::UnmanagedRam(StorageDevice& storage, std::size_t ram_bytes, std::size_t storage_offset)
    : storage_(&storage), storage_offset_(storage_offset), ram_(ram_bytes) {
  if (storage_offset + ram_bytes > storage.capacity()) throw Error(ErrorCode::kOutOfNvm, "RAM image too large");
}

std::uint64_t UnmanagedRam::checkpoint() {
  const std::uint64_t start = storage_->cost_meter().total();
  storage_->write(storage_offset_, ram_);
  return storage_->cost_meter().total() - start;
}

}  // namespace vnv
