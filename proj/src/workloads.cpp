#include "vnv/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "vnv/error.hpp"

namespace vnv {

namespace {

void require_size(std::size_t expected, std::size_t actual) {
  if (expected != actual) {
    throw Error(ErrorCode::kSizeMismatch,
                "expected " + std::to_string(expected) + " bytes, got " + std::to_string(actual));
  }
}

}  // namespace

// ---- queues ----

VnvQueue::VnvQueue(VnvHeap& heap, std::size_t element_bytes) : heap_(&heap), element_bytes_(element_bytes) {}

VnvQueue::VnvQueue(VnvHeap& heap, std::size_t element_bytes, std::vector<ObjectHandle> elements)
    : heap_(&heap), element_bytes_(element_bytes), elements_(elements.begin(), elements.end()) {}

void VnvQueue::push(std::span<const std::byte> payload) {
  require_size(element_bytes_, payload.size());
  elements_.push_back(heap_->alloc(payload));
}

std::vector<std::byte> VnvQueue::pop() {
  if (elements_.empty()) throw Error(ErrorCode::kQueueEmpty, "pop from an empty queue");
  const ObjectHandle head = elements_.front();
  std::vector<std::byte> out;
  {
    ReadGuard guard = heap_->get_ref(head);
    out.assign(guard.bytes().begin(), guard.bytes().end());
  }
  heap_->dealloc(head);
  elements_.pop_front();
  return out;
}

NvmQueue::NvmQueue(StorageDevice& storage, std::size_t element_bytes, std::size_t capacity,
                   std::size_t storage_offset)
    : storage_(&storage), element_bytes_(element_bytes), capacity_(capacity), storage_offset_(storage_offset) {
  if (storage_offset + capacity * element_bytes > storage.capacity()) {
    throw Error(ErrorCode::kOutOfNvm, "queue does not fit the device");
  }
}

void NvmQueue::push(std::span<const std::byte> payload) {
  require_size(element_bytes_, payload.size());
  if (size_ == capacity_) throw Error(ErrorCode::kOutOfNvm, "NVM queue full");
  storage_->write(storage_offset_ + ((head_ + size_) % capacity_) * element_bytes_, payload);
  ++size_;
}

std::vector<std::byte> NvmQueue::pop() {
  if (size_ == 0) throw Error(ErrorCode::kQueueEmpty, "pop from an empty queue");
  auto out = storage_->read(storage_offset_ + head_ * element_bytes_, element_bytes_);
  head_ = (head_ + 1) % capacity_;
  --size_;
  return out;
}

RamQueue::RamQueue(std::size_t element_bytes, std::size_t ram_bytes)
    : element_bytes_(element_bytes), slots_(element_bytes == 0 ? 0 : ram_bytes / element_bytes) {
  if (slots_ < 2) throw Error(ErrorCode::kConfigInvalid, "RAM cannot hold a queue of this element size");
  ring_.resize(slots_ * element_bytes_);
}

void RamQueue::push(std::span<const std::byte> payload) {
  require_size(element_bytes_, payload.size());
  if (size_ == capacity()) {
    throw Error(ErrorCode::kRamCapacityExceeded,
                "RAM-only queue holds at most " + std::to_string(capacity()) + " elements");
  }
  std::memcpy(ring_.data() + ((head_ + size_) % slots_) * element_bytes_, payload.data(), element_bytes_);
  ++size_;
}

std::vector<std::byte> RamQueue::pop() {
  if (size_ == 0) throw Error(ErrorCode::kQueueEmpty, "pop from an empty queue");
  const auto* begin = ring_.data() + head_ * element_bytes_;
  std::vector<std::byte> out(begin, begin + element_bytes_);
  head_ = (head_ + 1) % slots_;
  --size_;
  return out;
}

// ---- key-value stores ----

const ObjectHandle& VnvKvStore::find(Key key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw Error(ErrorCode::kKeyNotFound, "no key " + std::to_string(key));
  return it->second;
}

void VnvKvStore::put(Key key, std::span<const std::byte> value) {
  if (index_.count(key)) {
    update(key, value);
    return;
  }
  index_.emplace(key, heap_->alloc(value));
}

std::vector<std::byte> VnvKvStore::get(Key key) {
  ReadGuard guard = heap_->get_ref(find(key));
  return {guard.bytes().begin(), guard.bytes().end()};
}

void VnvKvStore::update(Key key, std::span<const std::byte> value) {
  const ObjectHandle& handle = find(key);
  require_size(handle.size(), value.size());
  WriteGuard guard = heap_->get_mut(handle);
  guard.assign(value);
}

const ManagedStateKvStore::Region& ManagedStateKvStore::find(Key key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw Error(ErrorCode::kKeyNotFound, "no key " + std::to_string(key));
  return it->second;
}

void ManagedStateKvStore::put(Key key, std::span<const std::byte> value) {
  if (index_.count(key)) {
    update(key, value);
    return;
  }
  if (value.empty() || value.size() > pool_->ram_bytes() - next_offset_) {
    throw Error(ErrorCode::kOutOfNvm, "pool RAM exhausted");
  }
  index_.emplace(key, Region{next_offset_, value.size()});
  next_offset_ += value.size();
  update(key, value);
}

std::vector<std::byte> ManagedStateKvStore::get(Key key) {
  const Region& r = find(key);
  auto token = pool_->ms_open(r.offset, r.length, AccessMode::kRead);
  auto view = pool_->read_view(token);
  std::vector<std::byte> out(view.begin(), view.end());
  pool_->ms_close(token);
  return out;
}

void ManagedStateKvStore::update(Key key, std::span<const std::byte> value) {
  const Region& r = find(key);
  require_size(r.length, value.size());
  auto token = pool_->ms_open(r.offset, r.length, AccessMode::kWrite);
  std::memcpy(pool_->write_view(token).data(), value.data(), value.size());
  pool_->ms_close(token);
}

// ---- patterns ----

PatternKind parse_pattern(const std::string& name) {
  if (name == "sequential") return PatternKind::kSequential;
  if (name == "unequal") return PatternKind::kUnequal;
  if (name == "random" || name == "uniform") return PatternKind::kRandomUniform;
  throw Error(ErrorCode::kInvalidArgument, "unknown pattern '" + name + "'");
}

std::string to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::kSequential:
      return "sequential";
    case PatternKind::kUnequal:
      return "unequal";
    case PatternKind::kRandomUniform:
      return "random";
  }
  return "?";
}

double unequal_weight(Key key) {
  const double s = std::sin(5.0 / 32.0 * static_cast<double>(key));
  return s * s * s * s + 0.1;
}

std::vector<double> unequal_weights(std::size_t n_keys) {
  std::vector<double> w(n_keys);
  for (std::size_t k = 0; k < n_keys; ++k) w[k] = unequal_weight(static_cast<Key>(k));
  return w;
}

std::vector<Key> gen_access_sequence(PatternKind pattern, std::size_t n_keys, std::size_t n_ops, std::uint64_t seed) {
  if (n_keys == 0) throw Error(ErrorCode::kInvalidArgument, "n_keys must be positive");
  std::vector<Key> keys(n_ops);
  std::mt19937_64 rng(seed);
  switch (pattern) {
    case PatternKind::kSequential:
      for (std::size_t i = 0; i < n_ops; ++i) keys[i] = static_cast<Key>(i % n_keys);
      break;
    case PatternKind::kUnequal: {
      auto w = unequal_weights(n_keys);
      std::discrete_distribution<Key> dist(w.begin(), w.end());
      for (auto& k : keys) k = dist(rng);
      break;
    }
    case PatternKind::kRandomUniform: {
      std::uniform_int_distribution<Key> dist(0, static_cast<Key>(n_keys - 1));
      for (auto& k : keys) k = dist(rng);
      break;
    }
  }
  return keys;
}

WorkloadSpec WorkloadSpec::make(std::uint64_t seed) {
  WorkloadSpec spec;
  spec.sizes.reserve(kObjectCount);
  for (auto [count, size] : {std::pair{64, 32}, {128, 128}, {32, 256}, {32, 1024}}) {
    spec.sizes.insert(spec.sizes.end(), count, size);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(spec.sizes.begin(), spec.sizes.end(), rng);
  return spec;
}

std::size_t WorkloadSpec::total_bytes() const { return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}); }

std::vector<std::byte> make_value(Key key, std::size_t size, std::uint64_t version) {
  std::vector<std::byte> v(size);
  std::uint64_t x = (static_cast<std::uint64_t>(key) << 32) ^ (version * 0x9E3779B97F4A7C15ULL) ^ size;
  for (auto& b : v) {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    b = static_cast<std::byte>(x);
  }
  return v;
}

}  // namespace vnv
