#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vnv/baselines.hpp"
#include "vnv/heap.hpp"
#include "vnv/storage.hpp"

namespace vnv {

// ---- FIFO queues -------------------------------------------------------------

class Queue {
 public:
  virtual ~Queue() = default;
  virtual void push(std::span<const std::byte> payload) = 0;
  virtual std::vector<std::byte> pop() = 0;
  virtual std::size_t size() const = 0;
  bool empty() const { return size() == 0; }
};

/// One heap object per element, so the heap evicts element by element.
class VnvQueue final : public Queue {
 public:
  explicit VnvQueue(VnvHeap& heap, std::size_t element_bytes = 256);
  /// Reattaches to elements that survived a restore, oldest first.
  VnvQueue(VnvHeap& heap, std::size_t element_bytes, std::vector<ObjectHandle> elements);

  void push(std::span<const std::byte> payload) override;
  std::vector<std::byte> pop() override;
  std::size_t size() const override { return elements_.size(); }
  const std::deque<ObjectHandle>& elements() const { return elements_; }

 private:
  VnvHeap* heap_;
  std::size_t element_bytes_;
  std::deque<ObjectHandle> elements_;
};

/// Ring buffer stored in NVM; only the head/tail indices live in RAM.
class NvmQueue final : public Queue {
 public:
  NvmQueue(StorageDevice& storage, std::size_t element_bytes = 256, std::size_t capacity = 1024,
           std::size_t storage_offset = 0);

  void push(std::span<const std::byte> payload) override;
  std::vector<std::byte> pop() override;
  std::size_t size() const override { return size_; }

 private:
  StorageDevice* storage_;
  std::size_t element_bytes_;
  std::size_t capacity_;
  std::size_t storage_offset_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// Volatile-only ring; holds what fits in its RAM budget and nothing more.
class RamQueue final : public Queue {
 public:
  static constexpr std::size_t kDefaultRamBytes = 4096;

  explicit RamQueue(std::size_t element_bytes = 256, std::size_t ram_bytes = kDefaultRamBytes);

  void push(std::span<const std::byte> payload) override;
  std::vector<std::byte> pop() override;
  std::size_t size() const override { return size_; }
  std::size_t capacity() const { return slots_ - 1; }

 private:
  std::size_t element_bytes_;
  std::size_t slots_;
  std::vector<std::byte> ring_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

// ---- key-value store ------------------------------------------------------------

using Key = std::uint32_t;

class KvStore {
 public:
  virtual ~KvStore() = default;
  virtual void put(Key key, std::span<const std::byte> value) = 0;
  virtual std::vector<std::byte> get(Key key) = 0;
  virtual void update(Key key, std::span<const std::byte> value) = 0;
  virtual std::size_t size() const = 0;
  virtual std::string backend_name() const = 0;
};

class VnvKvStore final : public KvStore {
 public:
  explicit VnvKvStore(VnvHeap& heap) : heap_(&heap) {}

  void put(Key key, std::span<const std::byte> value) override;
  std::vector<std::byte> get(Key key) override;
  void update(Key key, std::span<const std::byte> value) override;
  std::size_t size() const override { return index_.size(); }
  std::string backend_name() const override { return "vnv"; }

 private:
  const ObjectHandle& find(Key key) const;

  VnvHeap* heap_;
  std::unordered_map<Key, ObjectHandle> index_;
};

/// Values packed back to back in the pool's RAM in insertion order.
class ManagedStateKvStore final : public KvStore {
 public:
  explicit ManagedStateKvStore(ManagedStatePool& pool) : pool_(&pool) {}

  void put(Key key, std::span<const std::byte> value) override;
  std::vector<std::byte> get(Key key) override;
  void update(Key key, std::span<const std::byte> value) override;
  std::size_t size() const override { return index_.size(); }
  std::string backend_name() const override { return "managed-state"; }

 private:
  struct Region {
    std::size_t offset;
    std::size_t length;
  };
  const Region& find(Key key) const;

  ManagedStatePool* pool_;
  std::unordered_map<Key, Region> index_;
  std::size_t next_offset_ = 0;
};

// ---- access patterns and the evaluation workload ----------------------------------

enum class PatternKind { kSequential, kUnequal, kRandomUniform };

PatternKind parse_pattern(const std::string& name);
std::string to_string(PatternKind kind);

/// Unnormalized weight of `key` under the unequal pattern.
double unequal_weight(Key key);
std::vector<double> unequal_weights(std::size_t n_keys);

std::vector<Key> gen_access_sequence(PatternKind pattern, std::size_t n_keys, std::size_t n_ops, std::uint64_t seed);

/// 256 values: 64 x 32 B, 128 x 128 B, 32 x 256 B, 32 x 1024 B, in seeded order.
struct WorkloadSpec {
  static constexpr std::size_t kObjectCount = 256;
  static constexpr std::size_t kTotalBytes = 59392;

  std::vector<std::size_t> sizes;  // sizes[key]

  static WorkloadSpec make(std::uint64_t seed);
  std::size_t total_bytes() const;
  std::size_t dirty_limit() const { return total_bytes() / 5; }
};

/// Deterministic payload bytes for (key, version).
std::vector<std::byte> make_value(Key key, std::size_t size, std::uint64_t version);

}  // namespace vnv
