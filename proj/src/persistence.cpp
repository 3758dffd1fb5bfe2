#include "vnv/persistence.hpp"

#include <algorithm>
#include <optional>
#include <utility>
#include <string>

#include "vnv/codec.hpp"

namespace vnv {

using layout::kEntryBytes;
using layout::kResidentMetadataBytes;

PersistReport VnvHeap::persist() {
  PersistReport report;
  const std::uint64_t start = storage_->cost_meter().total();

  for (ObjectId id : std::vector<ObjectId>(resident_.begin(), resident_.end())) {
    Record& r = records_[id];
    if (!r.modified) continue;
    if (r.writer) {
      // The writer may keep mutating, so the object stays modified and charged.
      write_payload(id);
    } else {
      sync_record(id);
    }
    ++report.objects_synced;
  }

  const int target = committed_ ? 1 - active_slot_ : 0;
  codec::Writer slot;
  slot.u32(static_cast<std::uint32_t>(sequence_ + 1));
  slot.u32(static_cast<std::uint32_t>(resident_.size()));
  slot.u32(static_cast<std::uint32_t>(records_.size()));
  for (ObjectId id : resident_) {
    const Record& r = records_[id];
    slot.append(encode_entry(id, r, r.pinned()));
  }
  storage_->write(slot_offset(target), slot.bytes());

  std::array<std::uint32_t, 2> lengths = slot_lengths_;
  lengths[target] = static_cast<std::uint32_t>(slot.size());
  codec::Writer table;
  for (int s = 0; s < 2; ++s) {
    table.u32(static_cast<std::uint32_t>(slot_offset(s)));
    table.u32(lengths[s]);
  }
  storage_->write(layout::kSlotTableOffset, table.bytes());

  // The commit word is the last transfer; the checkpoint exists once it lands.
  codec::Writer commit;
  commit.u16(layout::kVersion);
  commit.u8(static_cast<std::uint8_t>(target));
  commit.u8(1);
  storage_->write(layout::kCommitWordOffset, commit.bytes());

  slot_lengths_ = lengths;
  active_slot_ = target;
  committed_ = true;
  ++sequence_;
  commit_extents();
  report.metadata_bytes_written = slot.size() + table.size() + commit.size();
  report.words_transferred = storage_->cost_meter().total() - start;
  return report;
}

namespace {

struct EntryImage {
  ObjectId id = 0;
  std::uint32_t nvm_offset = 0;
  std::uint32_t size = 0;
  std::uint8_t flags = 0;
  std::uint32_t cache_offset = 0;
};

EntryImage decode_entry(codec::Reader& in) {
  EntryImage e;
  e.id = in.u32();
  e.nvm_offset = in.u32();
  e.size = in.u32();
  e.flags = in.u8();
  in.skip(3);
  e.cache_offset = in.u32();
  return e;
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::kNoValidCheckpoint, why); }

}  // namespace

VnvHeap VnvHeap::restore(StorageDevice& storage) {
  if (storage.capacity() < layout::kSlotRegionOffset) corrupt("device too small");
  const auto sb_bytes = storage.read(layout::kSuperblockOffset, layout::kSuperblockBytes);
  codec::Reader sb(sb_bytes);
  if (sb.u32() != layout::kMagic) corrupt("no heap on device");
  if (sb.u16() != layout::kVersion) corrupt("unsupported layout version");
  const int active = sb.u8();
  if (sb.u8() != 1) corrupt("no checkpoint was ever committed");
  if (active > 1) corrupt("bad active slot");
  std::array<std::uint32_t, 2> lengths{};
  for (int s = 0; s < 2; ++s) {
    sb.u32();
    lengths[s] = sb.u32();
  }

  const auto desc_bytes = storage.read(layout::kDescriptorOffset, layout::kDescriptorBytes);
  codec::Reader desc(desc_bytes);
  HeapConfig config;
  config.cache_size_bytes = desc.u32();
  config.max_modified_state_bytes = desc.u32();
  const std::size_t directory_offset = desc.u32();
  config.max_objects = desc.u32();
  try {
    config.validate();
  } catch (const Error&) {
    corrupt("heap descriptor is invalid");
  }

  VnvHeap heap(storage, config, RestoreTag{});
  heap.directory_capacity_ = config.max_objects;
  heap.directory_offset_ = directory_offset;
  if (directory_offset != heap.slot_offset(1) + heap.slot_capacity()) corrupt("heap descriptor is inconsistent");
  const std::size_t region =
      ExtentAllocator::align(directory_offset + heap.directory_capacity_ * 2 * layout::kDirEntryBytes);
  if (region >= storage.capacity()) corrupt("heap does not fit the device");
  heap.nvm_ = ExtentAllocator(region, storage.capacity() - region);

  const auto slot_bytes = storage.read(heap.slot_offset(active), lengths[active]);
  codec::Reader slot(slot_bytes);
  const std::uint32_t sequence = slot.u32();
  const std::uint32_t count = slot.u32();
  const std::uint32_t next_id = slot.u32();
  if (layout::kSlotHeaderBytes + static_cast<std::size_t>(count) * kEntryBytes != lengths[active]) {
    corrupt("slot length does not match its entry count");
  }
  std::vector<EntryImage> slot_entries;
  for (std::uint32_t i = 0; i < count; ++i) slot_entries.push_back(decode_entry(slot));

  const std::size_t dir_bytes_total = heap.directory_capacity_ * 2 * layout::kDirEntryBytes;
  const auto dir_bytes = storage.read(directory_offset, dir_bytes_total);
  codec::Reader dir(dir_bytes);
  heap.directory_epochs_.assign(heap.directory_capacity_, {0, 0});
  std::vector<EntryImage> durable;
  std::vector<std::pair<ObjectId, int>> stale;
  std::size_t record_count = next_id;
  for (std::size_t i = 0; i < heap.directory_capacity_; ++i) {
    std::optional<EntryImage> newest;
    std::uint32_t newest_epoch = 0;
    for (int copy = 0; copy < 2; ++copy) {
      EntryImage e;
      e.id = dir.u32();
      e.nvm_offset = dir.u32();
      e.size = dir.u32();
      const std::uint32_t epoch = dir.u32();
      e.flags = dir.u8();
      dir.skip(3);
      if (epoch > sequence) {
        stale.emplace_back(static_cast<ObjectId>(i), copy);
        continue;
      }
      heap.directory_epochs_[i][copy] = epoch;
      if (epoch >= 1 && epoch > newest_epoch) {
        newest = e;
        newest_epoch = epoch;
      }
    }
    if (!newest || !(newest->flags & layout::kFlagLive)) continue;
    if (newest->id != i) corrupt("directory entry out of place");
    durable.push_back(*newest);
    record_count = std::max<std::size_t>(record_count, newest->id + 1);
  }
  if (record_count > heap.directory_capacity_) corrupt("checkpoint names too many objects");

  heap.records_.resize(record_count);
  auto adopt = [&](const EntryImage& e) {
    if (e.id >= record_count || e.size == 0) corrupt("entry names an impossible object");
    Record& r = heap.records_[e.id];
    r.live = true;
    r.nvm_offset = e.nvm_offset;
    r.size = e.size;
  };
  for (const EntryImage& e : durable) {
    adopt(e);
    heap.records_[e.id].directory_durable = true;
    heap.records_[e.id].directory_written = true;
  }
  for (const EntryImage& e : slot_entries) {
    Record& r = heap.records_.at(e.id);
    if (r.live && r.nvm_offset != e.nvm_offset) r.directory_durable = false;
    adopt(e);
  }

  for (ObjectId id = 0; id < heap.records_.size(); ++id) {
    Record& r = heap.records_[id];
    if (!r.live) continue;
    if (!heap.nvm_.allocate_at(r.nvm_offset, r.size)) corrupt("object extents overlap");
    r.committed_offset = r.nvm_offset;
  }
  for (ObjectId id = static_cast<ObjectId>(heap.records_.size()); id-- > 0;) {
    if (!heap.records_[id].live) heap.free_ids_.push_back(id);
  }

  for (const EntryImage& e : slot_entries) {
    if (!(e.flags & layout::kFlagPinned)) continue;
    Record& r = heap.records_[e.id];
    if (e.cache_offset < kResidentMetadataBytes ||
        !heap.cache_alloc_.allocate_at(e.cache_offset - kResidentMetadataBytes, cache_charge(r.size))) {
      corrupt("pinned object cannot return to its cache address");
    }
    storage.read(r.nvm_offset, std::span<std::byte>(heap.cache_.data() + e.cache_offset, r.size));
    heap.place_resident(e.id, e.cache_offset);
  }

  heap.sequence_ = sequence;

  // Copies written after the checkpoint would become valid with the next
  // commit, so they are retired before anything else is written.
  for (auto [id, copy] : stale) {
    const std::array<std::byte, layout::kDirTombstoneBytes> zero{};
    storage.write(heap.directory_entry_offset(id, copy) + layout::kDirEpochOffset, zero);
    heap.directory_epochs_[id][copy] = 0;
  }
  // Objects only named by the checkpoint slot become individually durable, so
  // the next checkpoint need not list them.
  for (const EntryImage& e : slot_entries) {
    Record& r = heap.records_[e.id];
    if (r.directory_durable || r.resident) continue;
    heap.write_directory(e.id);
    r.directory_durable = true;
    r.directory_written = true;
  }

  heap.active_slot_ = active;
  heap.slot_lengths_ = lengths;
  heap.committed_ = true;
  return heap;
}

PersistReport persist(VnvHeap& heap) { return heap.persist(); }

VnvHeap restore(StorageDevice& storage) { return VnvHeap::restore(storage); }

std::uint64_t persist_bound(const HeapConfig& config) {
  return words_for(config.max_modified_state_bytes + layout::kSuperblockUpdateBytes);
}

double transfer_time_us(std::uint64_t words, const EnergyModel& model) {
  return static_cast<double>(words) * model.word_latency_us;
}

double wcec_mj(std::uint64_t words, const EnergyModel& model) {
  // mW * us = nJ
  return model.power_mw * transfer_time_us(words, model) * 1e-6;
}

}  // namespace vnv
