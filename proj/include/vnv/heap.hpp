#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <list>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "vnv/error.hpp"
#include "vnv/extent_allocator.hpp"
#include "vnv/layout.hpp"
#include "vnv/storage.hpp"

namespace vnv {

using ObjectId = std::uint32_t;

struct HeapConfig {
  std::size_t cache_size_bytes = 4096;
  std::size_t max_modified_state_bytes = 2048;
  /// Directory capacity (maximum live objects). 0 derives it from the device.
  std::size_t max_objects = 0;

  /// Throws ConfigInvalid unless 0 < limit <= cache and one minimal object can
  /// be cached and modified.
  void validate() const;
};

/// Volatile per-object state.
struct ObjectMeta {
  ObjectId id = 0;
  std::size_t nvm_offset = 0;
  std::size_t size_bytes = 0;
  bool resident = false;
  bool pinned = false;
  bool modified = false;
  std::size_t cache_offset = 0;  // valid iff resident
};

struct ObjectState {
  bool resident = false;
  bool pinned = false;
  bool modified = false;
  bool operator==(const ObjectState&) const = default;
};

struct HeapStats {
  std::size_t resident_bytes = 0;
  std::size_t resident_count = 0;
  std::size_t dirty_bytes = 0;
  std::size_t pinned_count = 0;
  std::size_t cache_free_bytes = 0;
  std::size_t nvm_free_bytes = 0;
  std::size_t object_count = 0;
};

struct PersistReport {
  std::uint64_t words_transferred = 0;
  std::size_t objects_synced = 0;
  std::size_t metadata_bytes_written = 0;
};

/// Identifies one allocation of one heap instance.
class ObjectHandle {
 public:
  ObjectHandle() = default;

  ObjectId id() const { return id_; }
  std::size_t size() const { return size_; }
  bool operator==(const ObjectHandle&) const = default;

 private:
  friend class VnvHeap;
  ObjectHandle(std::uint64_t heap, ObjectId id, std::uint32_t generation, std::size_t size)
      : heap_(heap), id_(id), generation_(generation), size_(size) {}

  std::uint64_t heap_ = 0;
  ObjectId id_ = 0;
  std::uint32_t generation_ = 0;
  std::size_t size_ = 0;
};

class VnvHeap;

/// Shared read access. The object stays resident, pinned and address-stable
/// until release() or destruction; afterwards every accessor throws.
class ReadGuard {
 public:
  ReadGuard(ReadGuard&& other) noexcept;
  ReadGuard& operator=(ReadGuard&& other) noexcept;
  ReadGuard(const ReadGuard&) = delete;
  ReadGuard& operator=(const ReadGuard&) = delete;
  ~ReadGuard();

  std::span<const std::byte> bytes() const;
  template <typename T>
  const T& as() const {
    static_assert(std::is_trivially_copyable_v<T>);
    auto b = bytes();
    if (sizeof(T) > b.size()) throw Error(ErrorCode::kSizeMismatch, "type larger than object");
    return *reinterpret_cast<const T*>(b.data());
  }

  const ObjectHandle& handle() const { return handle_; }
  bool live() const { return heap_ != nullptr; }
  void release();

 private:
  friend class VnvHeap;
  ReadGuard(VnvHeap* heap, ObjectHandle handle, std::byte* data)
      : heap_(heap), handle_(handle), data_(data) {}

  VnvHeap* heap_ = nullptr;
  ObjectHandle handle_;
  std::byte* data_ = nullptr;
};

/// Exclusive read/write access; the object counts as modified from the moment
/// the guard is handed out.
class WriteGuard {
 public:
  WriteGuard(WriteGuard&& other) noexcept;
  WriteGuard& operator=(WriteGuard&& other) noexcept;
  WriteGuard(const WriteGuard&) = delete;
  WriteGuard& operator=(const WriteGuard&) = delete;
  ~WriteGuard();

  std::span<std::byte> bytes() const;
  template <typename T>
  T& as() const {
    static_assert(std::is_trivially_copyable_v<T>);
    auto b = bytes();
    if (sizeof(T) > b.size()) throw Error(ErrorCode::kSizeMismatch, "type larger than object");
    return *reinterpret_cast<T*>(b.data());
  }
  void assign(std::span<const std::byte> data) const;

  const ObjectHandle& handle() const { return handle_; }
  bool live() const { return heap_ != nullptr; }
  void release();

 private:
  friend class VnvHeap;
  WriteGuard(VnvHeap* heap, ObjectHandle handle, std::byte* data)
      : heap_(heap), handle_(handle), data_(data) {}

  VnvHeap* heap_ = nullptr;
  ObjectHandle handle_;
  std::byte* data_ = nullptr;
};

/// A virtually non-volatile heap: objects live in NVM, are cached in a bounded
/// volatile buffer, and the unsynchronized state never exceeds the dirty limit,
/// so persist() finishes within persist_bound(config) word transfers.
///
/// Guards must not outlive the heap that issued them.
class VnvHeap {
 public:
  /// Formats `storage` for a new, empty heap.
  VnvHeap(StorageDevice& storage, const HeapConfig& config);
  /// Rebuilds a heap from the last committed checkpoint on `storage`.
  static VnvHeap restore(StorageDevice& storage);

  VnvHeap(VnvHeap&&) = default;
  VnvHeap(const VnvHeap&) = delete;
  VnvHeap& operator=(const VnvHeap&) = delete;
  VnvHeap& operator=(VnvHeap&&) = delete;
  ~VnvHeap() = default;

  ObjectHandle alloc(std::span<const std::byte> initial_payload);
  ObjectHandle alloc_zeroed(std::size_t size);
  void dealloc(const ObjectHandle& handle);

  ReadGuard get_ref(const ObjectHandle& handle);
  WriteGuard get_mut(const ObjectHandle& handle);

  /// Writes a modified resident object back to its NVM extent.
  std::uint64_t sync(const ObjectHandle& handle);
  /// Drops an unpinned, unmodified object from the cache.
  void unload(const ObjectHandle& handle);
  /// sync (if modified) followed by unload.
  void evict(const ObjectHandle& handle);

  /// Persists all unsynchronized state and commits a checkpoint.
  PersistReport persist();

  enum class VictimAction { kSync, kUnload, kSyncAndUnload };
  struct Victim {
    ObjectId id;
    VictimAction action;
    bool operator==(const Victim&) const = default;
  };
  /// Oldest-resident-first unpinned victims whose eviction frees a contiguous
  /// cache hole of `needed_cache_bytes`. Throws CachePressureUnresolvable.
  std::vector<Victim> choose_cache_victims(std::size_t needed_cache_bytes) const;
  /// Victims whose sync (then unload) brings dirty_bytes + extra within the
  /// limit. Throws DirtyBudgetUnsatisfiable.
  std::vector<Victim> choose_dirty_victims(std::size_t extra_dirty_bytes) const;

  HeapStats stats() const;
  const HeapConfig& config() const { return config_; }
  StorageDevice& storage() const { return *storage_; }
  ObjectMeta meta(const ObjectHandle& handle) const;
  ObjectState state(const ObjectHandle& handle) const;
  std::vector<ObjectId> resident_ids() const;
  std::vector<ObjectHandle> handles() const;
  ObjectHandle handle_for(ObjectId id) const;
  std::size_t read_guard_count(const ObjectHandle& handle) const;
  bool write_guard_live(const ObjectHandle& handle) const;
  std::span<const std::byte> cache_buffer() const { return cache_; }
  std::size_t nvm_object_region_offset() const { return nvm_.base(); }
  const ExtentAllocator& nvm_allocator() const { return nvm_; }
  /// Sequence number of the last committed checkpoint (0 before the first).
  std::uint64_t persist_sequence() const { return sequence_; }

  using TransitionObserver = std::function<void(ObjectId, ObjectState from, ObjectState to)>;
  void set_transition_observer(TransitionObserver observer) { observer_ = std::move(observer); }

 private:
  friend class ReadGuard;
  friend class WriteGuard;

  struct Record {
    bool live = false;
    std::uint32_t generation = 0;
    std::size_t nvm_offset = 0;
    std::size_t size = 0;
    bool resident = false;
    bool modified = false;
    std::size_t cache_offset = 0;
    std::uint32_t readers = 0;
    bool writer = false;
    // The newest directory copy describes the current extent.
    bool directory_durable = false;
    // Some directory copy names this object, so dealloc must retire it.
    bool directory_written = false;
    // Extent referenced by the last committed checkpoint; never overwritten.
    std::optional<std::size_t> committed_offset;
    std::list<ObjectId>::iterator resident_pos;

    bool pinned() const { return readers > 0 || writer; }
    ObjectState state() const { return {resident, pinned(), modified}; }
  };

  struct RestoreTag {};
  VnvHeap(StorageDevice& storage, const HeapConfig& config, RestoreTag);

  static std::uint64_t next_instance_id();
  static std::size_t cache_charge(std::size_t size) {
    return ExtentAllocator::align(size) + layout::kResidentMetadataBytes;
  }

  Record& lookup(const ObjectHandle& handle);
  const Record& lookup(const ObjectHandle& handle) const;
  ObjectHandle make_handle(ObjectId id) const;
  void notify(ObjectId id, ObjectState from);

  void format_storage();
  std::size_t slot_offset(int slot) const;
  std::size_t slot_capacity() const;
  std::size_t directory_entry_offset(ObjectId id, int copy) const;
  std::vector<std::byte> encode_entry(ObjectId id, const Record& r, bool pinned) const;
  int writable_directory_copy(ObjectId id) const;
  void write_directory(ObjectId id);
  void retire_directory(ObjectId id);
  void write_payload(ObjectId id);
  void commit_extents();

  void make_room(ObjectId target, std::size_t extra_dirty, std::size_t needed_cache, ErrorCode failure);
  void apply(const std::vector<Victim>& victims);
  void load(ObjectId id);
  std::uint64_t sync_record(ObjectId id);
  void unload_record(ObjectId id);
  void place_resident(ObjectId id, std::size_t cache_offset);
  std::byte* payload(const Record& r) { return cache_.data() + r.cache_offset; }

  void release_read(ObjectId id);
  void release_write(ObjectId id);

  StorageDevice* storage_;
  HeapConfig config_;
  std::uint64_t instance_ = 0;
  std::vector<std::byte> cache_;
  ExtentAllocator cache_alloc_;
  ExtentAllocator nvm_;
  std::size_t directory_offset_ = 0;
  std::size_t directory_capacity_ = 0;
  std::vector<Record> records_;
  std::vector<ObjectId> free_ids_;
  std::vector<std::array<std::uint32_t, 2>> directory_epochs_;
  std::vector<std::size_t> pending_nvm_frees_;
  std::list<ObjectId> resident_;
  std::size_t dirty_bytes_ = layout::kPersistHeaderBytes;
  std::uint64_t sequence_ = 0;
  int active_slot_ = 0;
  std::array<std::uint32_t, 2> slot_lengths_{};
  bool committed_ = false;
  TransitionObserver observer_;
};

}  // namespace vnv
