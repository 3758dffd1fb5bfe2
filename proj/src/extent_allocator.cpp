#include "vnv/extent_allocator.hpp"

#include <iterator>

#include "vnv/error.hpp"

namespace vnv {

ExtentAllocator::ExtentAllocator(std::size_t base, std::size_t length)
    : base_(base), length_(length & ~(kAlignment - 1)) {
  if (base_ % kAlignment != 0) throw Error(ErrorCode::kInvalidArgument, "unaligned region base");
  if (length_ > 0) free_.emplace(base_, length_);
  free_bytes_ = length_;
}

std::optional<std::size_t> ExtentAllocator::allocate(std::size_t bytes) {
  const std::size_t need = align(bytes == 0 ? 1 : bytes);
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second < need) continue;
    const std::size_t offset = it->first;
    const std::size_t rest = it->second - need;
    free_.erase(it);
    if (rest > 0) free_.emplace(offset + need, rest);
    used_.emplace(offset, need);
    free_bytes_ -= need;
    return offset;
  }
  return std::nullopt;
}

bool ExtentAllocator::allocate_at(std::size_t offset, std::size_t bytes) {
  const std::size_t need = align(bytes == 0 ? 1 : bytes);
  if (offset % kAlignment != 0) return false;
  auto it = free_.upper_bound(offset);
  if (it == free_.begin()) return false;
  --it;
  const std::size_t start = it->first;
  const std::size_t end = start + it->second;
  if (offset + need > end) return false;
  free_.erase(it);
  if (offset > start) free_.emplace(start, offset - start);
  if (offset + need < end) free_.emplace(offset + need, end - offset - need);
  used_.emplace(offset, need);
  free_bytes_ -= need;
  return true;
}

void ExtentAllocator::free(std::size_t offset) {
  auto it = used_.find(offset);
  if (it == used_.end()) throw Error(ErrorCode::kPreconditionViolated, "free of unknown extent");
  const std::size_t length = it->second;
  used_.erase(it);
  free_bytes_ += length;
  insert_free(offset, length);
}

void ExtentAllocator::insert_free(std::size_t offset, std::size_t length) {
  auto next = free_.lower_bound(offset);
  if (next != free_.end() && offset + length == next->first) {
    length += next->second;
    next = free_.erase(next);
  }
  if (next != free_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second == offset) {
      prev->second += length;
      return;
    }
  }
  free_.emplace(offset, length);
}

bool ExtentAllocator::can_allocate(std::size_t bytes) const {
  const std::size_t need = align(bytes == 0 ? 1 : bytes);
  for (const auto& [offset, length] : free_) {
    if (length >= need) return true;
  }
  return false;
}

std::size_t ExtentAllocator::allocation_size(std::size_t offset) const {
  auto it = used_.find(offset);
  return it == used_.end() ? 0 : it->second;
}

std::vector<Extent> ExtentAllocator::free_extents() const {
  std::vector<Extent> out;
  for (const auto& [offset, length] : free_) out.push_back({offset, length});
  return out;
}

std::vector<Extent> ExtentAllocator::allocated_extents() const {
  std::vector<Extent> out;
  for (const auto& [offset, length] : used_) out.push_back({offset, length});
  return out;
}

}  // namespace vnv
