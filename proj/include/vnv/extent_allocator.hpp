#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

namespace vnv {

struct Extent {
  std::size_t offset = 0;
  std::size_t length = 0;

  std::size_t end() const { return offset + length; }
  bool operator==(const Extent&) const = default;
};

/// First-fit free-list allocator over [base, base+length) with 4-byte
/// granularity. Freed extents coalesce with their neighbours, so allocated and
/// free extents always tile the region.
class ExtentAllocator {
 public:
  static constexpr std::size_t kAlignment = 4;

  ExtentAllocator() = default;
  ExtentAllocator(std::size_t base, std::size_t length);

  static std::size_t align(std::size_t bytes) { return (bytes + kAlignment - 1) & ~(kAlignment - 1); }

  std::optional<std::size_t> allocate(std::size_t bytes);
  /// Claims exactly [offset, offset+align(bytes)); false if any part is in use.
  bool allocate_at(std::size_t offset, std::size_t bytes);
  void free(std::size_t offset);

  bool can_allocate(std::size_t bytes) const;
  std::size_t free_bytes() const { return free_bytes_; }
  std::size_t base() const { return base_; }
  std::size_t length() const { return length_; }
  std::size_t allocation_size(std::size_t offset) const;

  std::vector<Extent> free_extents() const;
  std::vector<Extent> allocated_extents() const;

 private:
  void insert_free(std::size_t offset, std::size_t length);

  std::size_t base_ = 0;
  std::size_t length_ = 0;
  std::size_t free_bytes_ = 0;
  std::map<std::size_t, std::size_t> free_;  // offset -> length
  std::map<std::size_t, std::size_t> used_;  // offset -> length
};

}  // namespace vnv
