#include "vnv/heap.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstring>
#include <string>
#include <utility>

#include "vnv/codec.hpp"

namespace vnv {

using layout::kEntryBytes;
using layout::kPersistHeaderBytes;
using layout::kResidentMetadataBytes;

namespace {

constexpr std::size_t kMinObjectCharge = ExtentAllocator::kAlignment + kResidentMetadataBytes;

std::size_t derived_directory_capacity(std::size_t device_capacity) {
  return std::max<std::size_t>(64, device_capacity / 256);
}

}  // namespace

void HeapConfig::validate() const {
  if (max_modified_state_bytes == 0) {
    throw Error(ErrorCode::kConfigInvalid, "dirty limit must be positive");
  }
  if (max_modified_state_bytes > cache_size_bytes) {
    throw Error(ErrorCode::kConfigInvalid, "dirty limit " + std::to_string(max_modified_state_bytes) +
                                               " exceeds cache size " + std::to_string(cache_size_bytes));
  }
  if (cache_size_bytes < kMinObjectCharge) {
    throw Error(ErrorCode::kConfigInvalid, "cache cannot hold a single object");
  }
  if (max_modified_state_bytes < kPersistHeaderBytes + kMinObjectCharge) {
    throw Error(ErrorCode::kConfigInvalid, "dirty limit cannot cover one modified object");
  }
  if (cache_size_bytes > 0xFFFFFFFFu) throw Error(ErrorCode::kConfigInvalid, "cache too large");
}

std::uint64_t VnvHeap::next_instance_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

VnvHeap::VnvHeap(StorageDevice& storage, const HeapConfig& config, RestoreTag)
    : storage_(&storage),
      config_(config),
      instance_(next_instance_id()),
      cache_(ExtentAllocator::align(config.cache_size_bytes), std::byte{0}),
      cache_alloc_(0, config.cache_size_bytes & ~(ExtentAllocator::kAlignment - 1)) {
  config_.validate();
}

VnvHeap::VnvHeap(StorageDevice& storage, const HeapConfig& config)
    : VnvHeap(storage, config, RestoreTag{}) {
  directory_capacity_ =
      config_.max_objects != 0 ? config_.max_objects : derived_directory_capacity(storage.capacity());
  config_.max_objects = directory_capacity_;
  directory_offset_ = slot_offset(1) + slot_capacity();
  const std::size_t region =
      ExtentAllocator::align(directory_offset_ + directory_capacity_ * 2 * layout::kDirEntryBytes);
  if (region >= storage.capacity()) {
    throw Error(ErrorCode::kConfigInvalid, "storage too small for heap layout");
  }
  nvm_ = ExtentAllocator(region, storage.capacity() - region);
  directory_epochs_.assign(directory_capacity_, {0, 0});
  format_storage();
}

std::size_t VnvHeap::slot_capacity() const {
  return layout::kSlotHeaderBytes + (config_.cache_size_bytes / kMinObjectCharge) * kEntryBytes;
}

std::size_t VnvHeap::slot_offset(int slot) const {
  return layout::kSlotRegionOffset + static_cast<std::size_t>(slot) * ExtentAllocator::align(slot_capacity());
}

std::size_t VnvHeap::directory_entry_offset(ObjectId id, int copy) const {
  return directory_offset_ + (static_cast<std::size_t>(id) * 2 + static_cast<std::size_t>(copy)) *
                                 layout::kDirEntryBytes;
}

int VnvHeap::writable_directory_copy(ObjectId id) const {
  // Overwrite whichever copy the committed checkpoint does not rely on.
  const auto& epochs = directory_epochs_[id];
  auto valid = [&](int c) { return epochs[c] >= 1 && epochs[c] <= sequence_; };
  if (valid(0) && (!valid(1) || epochs[0] >= epochs[1])) return 1;
  return 0;
}

void VnvHeap::write_directory(ObjectId id) {
  const Record& r = records_[id];
  const int copy = writable_directory_copy(id);
  const auto epoch = static_cast<std::uint32_t>(sequence_ + 1);
  codec::Writer w;
  w.u32(id);
  w.u32(static_cast<std::uint32_t>(r.nvm_offset));
  w.u32(static_cast<std::uint32_t>(r.size));
  w.u32(epoch);
  w.u8(layout::kFlagLive);
  w.u8(0);
  w.u8(0);
  w.u8(0);
  storage_->write(directory_entry_offset(id, copy), w.bytes());
  directory_epochs_[id][copy] = epoch;
}

void VnvHeap::retire_directory(ObjectId id) {
  const int copy = writable_directory_copy(id);
  const auto epoch = static_cast<std::uint32_t>(sequence_ + 1);
  codec::Writer w;
  w.u32(epoch);
  w.u32(0);
  storage_->write(directory_entry_offset(id, copy) + layout::kDirEpochOffset, w.bytes());
  directory_epochs_[id][copy] = epoch;
}

void VnvHeap::write_payload(ObjectId id) {
  Record& r = records_[id];
  if (r.committed_offset == r.nvm_offset) {
    // The last checkpoint still needs these bytes; redirect to a fresh extent.
    auto fresh = nvm_.allocate(r.size);
    if (!fresh) throw Error(ErrorCode::kOutOfNvm, "no NVM extent to shadow object " + std::to_string(id));
    r.nvm_offset = *fresh;
    r.directory_durable = false;
  }
  storage_->write(r.nvm_offset, std::span<const std::byte>(payload(r), ExtentAllocator::align(r.size)));
}

void VnvHeap::commit_extents() {
  for (Record& r : records_) {
    if (!r.live) continue;
    if (r.committed_offset && *r.committed_offset != r.nvm_offset) nvm_.free(*r.committed_offset);
    r.committed_offset = r.nvm_offset;
  }
  for (std::size_t offset : pending_nvm_frees_) nvm_.free(offset);
  pending_nvm_frees_.clear();
}

void VnvHeap::format_storage() {
  // Directory first so a stale image can never pair an old directory with the
  // new superblock.
  std::vector<std::byte> zeros(directory_capacity_ * 2 * layout::kDirEntryBytes, std::byte{0});
  storage_->write(directory_offset_, zeros);

  codec::Writer desc;
  desc.u32(static_cast<std::uint32_t>(config_.cache_size_bytes));
  desc.u32(static_cast<std::uint32_t>(config_.max_modified_state_bytes));
  desc.u32(static_cast<std::uint32_t>(directory_offset_));
  desc.u32(static_cast<std::uint32_t>(directory_capacity_));
  storage_->write(layout::kDescriptorOffset, desc.bytes());

  codec::Writer sb;
  sb.u32(layout::kMagic);
  sb.u16(layout::kVersion);
  sb.u8(0);
  sb.u8(0);
  sb.u32(static_cast<std::uint32_t>(slot_offset(0)));
  sb.u32(0);
  sb.u32(static_cast<std::uint32_t>(slot_offset(1)));
  sb.u32(0);
  storage_->write(layout::kSuperblockOffset, sb.bytes());
}

std::vector<std::byte> VnvHeap::encode_entry(ObjectId id, const Record& r, bool pinned) const {
  codec::Writer w;
  w.u32(id);
  w.u32(static_cast<std::uint32_t>(r.nvm_offset));
  w.u32(static_cast<std::uint32_t>(r.size));
  w.u8(static_cast<std::uint8_t>(layout::kFlagLive | (pinned ? layout::kFlagPinned : 0)));
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(r.resident ? r.cache_offset : 0));
  return w.take();
}

VnvHeap::Record& VnvHeap::lookup(const ObjectHandle& handle) {
  return const_cast<Record&>(std::as_const(*this).lookup(handle));
}

const VnvHeap::Record& VnvHeap::lookup(const ObjectHandle& handle) const {
  if (handle.heap_ != instance_ || handle.id_ >= records_.size()) {
    throw Error(ErrorCode::kInvalidHandle, "handle does not belong to this heap");
  }
  const Record& r = records_[handle.id_];
  if (!r.live || r.generation != handle.generation_) {
    throw Error(ErrorCode::kInvalidHandle, "handle " + std::to_string(handle.id_) + " was deallocated");
  }
  return r;
}

ObjectHandle VnvHeap::make_handle(ObjectId id) const {
  const Record& r = records_[id];
  return ObjectHandle(instance_, id, r.generation, r.size);
}

ObjectHandle VnvHeap::handle_for(ObjectId id) const {
  if (id >= records_.size() || !records_[id].live) {
    throw Error(ErrorCode::kInvalidHandle, "no live object with id " + std::to_string(id));
  }
  return make_handle(id);
}

std::vector<ObjectHandle> VnvHeap::handles() const {
  std::vector<ObjectHandle> out;
  for (ObjectId id = 0; id < records_.size(); ++id) {
    if (records_[id].live) out.push_back(make_handle(id));
  }
  return out;
}

void VnvHeap::notify(ObjectId id, ObjectState from) {
  if (observer_) observer_(id, from, records_[id].state());
}

// --- victim selection -------------------------------------------------------

std::vector<VnvHeap::Victim> VnvHeap::choose_cache_victims(std::size_t needed_cache_bytes) const {
  std::vector<Victim> victims;
  if (cache_alloc_.can_allocate(needed_cache_bytes)) return victims;
  ExtentAllocator scratch = cache_alloc_;
  for (ObjectId id : resident_) {
    const Record& r = records_[id];
    if (r.pinned()) continue;
    scratch.free(r.cache_offset - kResidentMetadataBytes);
    victims.push_back({id, r.modified ? VictimAction::kSyncAndUnload : VictimAction::kUnload});
    if (scratch.can_allocate(needed_cache_bytes)) return victims;
  }
  throw Error(ErrorCode::kCachePressureUnresolvable,
              "no unpinned residents left to free " + std::to_string(needed_cache_bytes) + " cache bytes");
}

std::vector<VnvHeap::Victim> VnvHeap::choose_dirty_victims(std::size_t extra_dirty_bytes) const {
  std::vector<Victim> victims;
  std::size_t projected = dirty_bytes_;
  const std::size_t limit = config_.max_modified_state_bytes;
  if (projected + extra_dirty_bytes <= limit) return victims;
  // Syncing modified objects first: it is what the limit is about, and they
  // stay cached.
  for (ObjectId id : resident_) {
    const Record& r = records_[id];
    if (r.pinned() || !r.modified) continue;
    victims.push_back({id, VictimAction::kSync});
    projected -= ExtentAllocator::align(r.size);
    if (projected + extra_dirty_bytes <= limit) return victims;
  }
  // Then drop residents to release their metadata charge.
  for (ObjectId id : resident_) {
    const Record& r = records_[id];
    if (r.pinned()) continue;
    auto it = std::find_if(victims.begin(), victims.end(), [id](const Victim& v) { return v.id == id; });
    if (it != victims.end()) {
      it->action = VictimAction::kSyncAndUnload;
    } else {
      victims.push_back({id, VictimAction::kUnload});
    }
    projected -= kResidentMetadataBytes;
    if (projected + extra_dirty_bytes <= limit) return victims;
  }
  throw Error(ErrorCode::kDirtyBudgetUnsatisfiable,
              "cannot free " + std::to_string(extra_dirty_bytes) + " bytes of dirty budget");
}

void VnvHeap::apply(const std::vector<Victim>& victims) {
  for (const Victim& v : victims) {
    if (v.action != VictimAction::kUnload && records_[v.id].modified) sync_record(v.id);
    if (v.action != VictimAction::kSync) unload_record(v.id);
  }
}

void VnvHeap::make_room(ObjectId target, std::size_t extra_dirty, std::size_t needed_cache,
                        ErrorCode failure) {
  // The target is pinned by the caller (or not yet resident), so it is never chosen.
  (void)target;
  try {
    apply(choose_dirty_victims(extra_dirty));
    if (needed_cache > 0) apply(choose_cache_victims(needed_cache));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDirtyBudgetUnsatisfiable || e.code() == ErrorCode::kCachePressureUnresolvable) {
      throw Error(failure, e.what());
    }
    throw;
  }
}

// --- primitive transitions ----------------------------------------------------

void VnvHeap::place_resident(ObjectId id, std::size_t cache_offset) {
  Record& r = records_[id];
  r.resident = true;
  r.cache_offset = cache_offset;
  r.resident_pos = resident_.insert(resident_.end(), id);
  dirty_bytes_ += kResidentMetadataBytes;
}

void VnvHeap::load(ObjectId id) {
  Record& r = records_[id];
  auto extent = cache_alloc_.allocate(cache_charge(r.size));
  if (!extent) throw Error(ErrorCode::kCachePressureUnresolvable, "cache fragmented");
  const std::size_t offset = *extent + kResidentMetadataBytes;
  storage_->read(r.nvm_offset, std::span<std::byte>(cache_.data() + offset, r.size));
  const ObjectState before = r.state();
  place_resident(id, offset);
  notify(id, before);
}

std::uint64_t VnvHeap::sync_record(ObjectId id) {
  Record& r = records_[id];
  if (!r.resident || !r.modified) {
    throw Error(ErrorCode::kPreconditionViolated, "sync requires a resident, modified object");
  }
  const auto before_words = storage_->cost_meter().words_written;
  write_payload(id);
  const ObjectState before = r.state();
  r.modified = false;
  dirty_bytes_ -= ExtentAllocator::align(r.size);
  notify(id, before);
  return storage_->cost_meter().words_written - before_words;
}

void VnvHeap::unload_record(ObjectId id) {
  Record& r = records_[id];
  if (!r.resident || r.pinned() || r.modified) {
    throw Error(ErrorCode::kPreconditionViolated, "unload requires a resident, unpinned, unmodified object");
  }
  if (!r.directory_durable) {
    write_directory(id);
    r.directory_durable = true;
    r.directory_written = true;
  }
  const ObjectState before = r.state();
  cache_alloc_.free(r.cache_offset - kResidentMetadataBytes);
  resident_.erase(r.resident_pos);
  r.resident = false;
  dirty_bytes_ -= kResidentMetadataBytes;
  notify(id, before);
}

// --- public operations ----------------------------------------------------------

ObjectHandle VnvHeap::alloc_zeroed(std::size_t size) {
  std::vector<std::byte> zeros(size, std::byte{0});
  return alloc(zeros);
}

ObjectHandle VnvHeap::alloc(std::span<const std::byte> initial_payload) {
  const std::size_t size = initial_payload.size();
  if (size == 0) throw Error(ErrorCode::kInvalidArgument, "objects must not be empty");
  if (cache_charge(size) > cache_alloc_.length()) {
    throw Error(ErrorCode::kObjectTooLarge, std::to_string(size) + " bytes cannot be cached");
  }

  ObjectId id;
  if (!free_ids_.empty()) {
    id = free_ids_.back();
  } else if (records_.size() < directory_capacity_) {
    id = static_cast<ObjectId>(records_.size());
  } else {
    throw Error(ErrorCode::kOutOfNvm, "object directory full");
  }
  auto nvm_offset = nvm_.allocate(size);
  if (!nvm_offset) throw Error(ErrorCode::kOutOfNvm, "no NVM extent for " + std::to_string(size) + " bytes");

  const std::size_t aligned = ExtentAllocator::align(size);
  // An object whose own charge exceeds the limit is written through and starts clean.
  const bool write_through =
      kPersistHeaderBytes + kResidentMetadataBytes + aligned > config_.max_modified_state_bytes;
  try {
    make_room(id, kResidentMetadataBytes + (write_through ? 0 : aligned), cache_charge(size),
              ErrorCode::kDirtyBudgetUnsatisfiable);
    if (write_through) storage_->write(*nvm_offset, initial_payload);
  } catch (...) {
    nvm_.free(*nvm_offset);
    throw;
  }
  auto extent = cache_alloc_.allocate(cache_charge(size));
  if (!extent) {
    nvm_.free(*nvm_offset);
    throw Error(ErrorCode::kCachePressureUnresolvable, "cache fragmented");
  }

  if (!free_ids_.empty()) {
    free_ids_.pop_back();
  } else {
    records_.emplace_back();
  }
  Record& r = records_[id];
  const std::uint32_t generation = r.generation;
  r = Record{};
  r.generation = generation;
  r.live = true;
  r.nvm_offset = *nvm_offset;
  r.size = size;
  const std::size_t offset = *extent + kResidentMetadataBytes;
  std::memcpy(cache_.data() + offset, initial_payload.data(), size);
  std::memset(cache_.data() + offset + size, 0, aligned - size);
  place_resident(id, offset);
  if (!write_through) {
    r.modified = true;
    dirty_bytes_ += aligned;
  }
  notify(id, ObjectState{});
  return make_handle(id);
}

void VnvHeap::dealloc(const ObjectHandle& handle) {
  Record& r = lookup(handle);
  if (r.pinned()) throw Error(ErrorCode::kStillPinned, "object " + std::to_string(handle.id()) + " has live guards");
  const ObjectId id = handle.id();
  if (r.directory_written) retire_directory(id);
  if (r.resident) {
    cache_alloc_.free(r.cache_offset - kResidentMetadataBytes);
    resident_.erase(r.resident_pos);
    dirty_bytes_ -= kResidentMetadataBytes;
    if (r.modified) dirty_bytes_ -= ExtentAllocator::align(r.size);
  }
  if (r.committed_offset) {
    pending_nvm_frees_.push_back(*r.committed_offset);
    if (*r.committed_offset != r.nvm_offset) nvm_.free(r.nvm_offset);
  } else {
    nvm_.free(r.nvm_offset);
  }
  const ObjectState before = r.state();
  const std::uint32_t generation = r.generation + 1;
  r = Record{};
  r.generation = generation;
  free_ids_.push_back(id);
  if (observer_) observer_(id, before, ObjectState{});
}

ReadGuard VnvHeap::get_ref(const ObjectHandle& handle) {
  Record& r = lookup(handle);
  const ObjectId id = handle.id();
  if (r.writer) throw Error(ErrorCode::kWriteGuardActive, "object " + std::to_string(id) + " is being written");
  if (!r.resident) {
    make_room(id, kResidentMetadataBytes, cache_charge(r.size), ErrorCode::kCachePressureUnresolvable);
    load(id);
  }
  const ObjectState before = r.state();
  ++r.readers;
  notify(id, before);
  return ReadGuard(this, make_handle(id), payload(r));
}

WriteGuard VnvHeap::get_mut(const ObjectHandle& handle) {
  Record& r = lookup(handle);
  const ObjectId id = handle.id();
  if (r.writer || r.readers > 0) {
    throw Error(ErrorCode::kGuardActive, "object " + std::to_string(id) + " already has a live guard");
  }
  const std::size_t aligned = ExtentAllocator::align(r.size);
  if (kPersistHeaderBytes + kResidentMetadataBytes + aligned > config_.max_modified_state_bytes) {
    throw Error(ErrorCode::kDirtyBudgetUnsatisfiable,
                "object of " + std::to_string(r.size) + " bytes exceeds the dirty limit on its own");
  }
  if (!r.resident) {
    make_room(id, kResidentMetadataBytes + aligned, cache_charge(r.size), ErrorCode::kDirtyBudgetUnsatisfiable);
    load(id);
  } else if (!r.modified) {
    // Pin first so the object cannot be chosen while its charge is made room for.
    r.writer = true;
    try {
      make_room(id, aligned, 0, ErrorCode::kDirtyBudgetUnsatisfiable);
    } catch (...) {
      r.writer = false;
      throw;
    }
    r.writer = false;
  }
  const ObjectState before = r.state();
  r.writer = true;
  if (!r.modified) {
    r.modified = true;
    dirty_bytes_ += aligned;
  }
  notify(id, before);
  return WriteGuard(this, make_handle(id), payload(r));
}

std::uint64_t VnvHeap::sync(const ObjectHandle& handle) {
  const Record& r = lookup(handle);
  if (r.writer) throw Error(ErrorCode::kStillPinned, "cannot sync under a live write guard");
  return sync_record(handle.id());
}

void VnvHeap::unload(const ObjectHandle& handle) {
  lookup(handle);
  unload_record(handle.id());
}

void VnvHeap::evict(const ObjectHandle& handle) {
  const Record& r = lookup(handle);
  if (!r.resident) return;
  if (r.pinned()) throw Error(ErrorCode::kStillPinned, "cannot evict a pinned object");
  if (r.modified) sync_record(handle.id());
  unload_record(handle.id());
}

void VnvHeap::release_read(ObjectId id) {
  Record& r = records_[id];
  const ObjectState before = r.state();
  --r.readers;
  notify(id, before);
}

void VnvHeap::release_write(ObjectId id) {
  Record& r = records_[id];
  const ObjectState before = r.state();
  r.writer = false;
  notify(id, before);
}

// --- introspection -------------------------------------------------------------

HeapStats VnvHeap::stats() const {
  HeapStats s;
  s.dirty_bytes = dirty_bytes_;
  s.cache_free_bytes = cache_alloc_.free_bytes();
  s.nvm_free_bytes = nvm_.free_bytes();
  for (const Record& r : records_) {
    if (!r.live) continue;
    ++s.object_count;
    if (r.resident) {
      s.resident_bytes += r.size;
      ++s.resident_count;
    }
    if (r.pinned()) ++s.pinned_count;
  }
  return s;
}

ObjectMeta VnvHeap::meta(const ObjectHandle& handle) const {
  const Record& r = lookup(handle);
  return ObjectMeta{handle.id(), r.nvm_offset, r.size, r.resident, r.pinned(), r.modified, r.cache_offset};
}

ObjectState VnvHeap::state(const ObjectHandle& handle) const { return lookup(handle).state(); }

std::vector<ObjectId> VnvHeap::resident_ids() const { return {resident_.begin(), resident_.end()}; }

std::size_t VnvHeap::read_guard_count(const ObjectHandle& handle) const { return lookup(handle).readers; }

bool VnvHeap::write_guard_live(const ObjectHandle& handle) const { return lookup(handle).writer; }

// --- guards ------------------------------------------------------------------------

ReadGuard::ReadGuard(ReadGuard&& other) noexcept
    : heap_(std::exchange(other.heap_, nullptr)), handle_(other.handle_), data_(std::exchange(other.data_, nullptr)) {}

ReadGuard& ReadGuard::operator=(ReadGuard&& other) noexcept {
  if (this != &other) {
    release();
    heap_ = std::exchange(other.heap_, nullptr);
    handle_ = other.handle_;
    data_ = std::exchange(other.data_, nullptr);
  }
  return *this;
}

ReadGuard::~ReadGuard() { release(); }

void ReadGuard::release() {
  if (!heap_) return;
  heap_->release_read(handle_.id());
  heap_ = nullptr;
  data_ = nullptr;
}

std::span<const std::byte> ReadGuard::bytes() const {
  if (!heap_) throw Error(ErrorCode::kGuardReleased, "read guard used after release");
  return {data_, handle_.size()};
}

WriteGuard::WriteGuard(WriteGuard&& other) noexcept
    : heap_(std::exchange(other.heap_, nullptr)), handle_(other.handle_), data_(std::exchange(other.data_, nullptr)) {}

WriteGuard& WriteGuard::operator=(WriteGuard&& other) noexcept {
  if (this != &other) {
    release();
    heap_ = std::exchange(other.heap_, nullptr);
    handle_ = other.handle_;
    data_ = std::exchange(other.data_, nullptr);
  }
  return *this;
}

WriteGuard::~WriteGuard() { release(); }

void WriteGuard::release() {
  if (!heap_) return;
  heap_->release_write(handle_.id());
  heap_ = nullptr;
  data_ = nullptr;
}

std::span<std::byte> WriteGuard::bytes() const {
  if (!heap_) throw Error(ErrorCode::kGuardReleased, "write guard used after release");
  return {data_, handle_.size()};
}

void WriteGuard::assign(std::span<const std::byte> data) const {
  auto target = bytes();
  if (data.size() != target.size()) throw Error(ErrorCode::kSizeMismatch, "assign must cover the whole object");
  std::memcpy(target.data(), data.data(), data.size());
}

}  // namespace vnv
