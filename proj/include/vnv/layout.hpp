#pragma once

#include <cstddef>
#include <cstdint>

// On-NVM layout shared by the heap and the checkpoint code. All integers are
// little-endian.
//
//   0    superblock (24 B): "VNVH", version u16, active slot u8, commit u8,
//        slot A offset u32, slot A length u32, slot B offset u32, slot B length u32
//   32   heap descriptor (16 B): cache size, dirty limit, directory offset,
//        directory capacity (u32 each); written once at init
//   48   slot A, slot B: 12 B slot header + one 20 B entry per resident object
//        directory: two 20 B copies per handle id, for objects that were unloaded
//        object region: payload extents up to the device capacity
//
// Slot entry: handle id u32, nvm offset u32, size u32, flags u8, pad u8 x3, cache offset u32.
// Directory copy: handle id u32, nvm offset u32, size u32, epoch u32, flags u8, pad u8 x3.
// A copy belongs to the checkpoint with sequence S when 1 <= epoch <= S; of
// two such copies the one with the larger epoch wins.
namespace vnv::layout {

inline constexpr std::uint32_t kMagic = 0x484E5656;  // "VNVH"
inline constexpr std::uint16_t kVersion = 1;

inline constexpr std::size_t kSuperblockOffset = 0;
inline constexpr std::size_t kSuperblockBytes = 24;
inline constexpr std::size_t kCommitWordOffset = 4;
inline constexpr std::size_t kSlotTableOffset = 8;
inline constexpr std::size_t kSlotTableBytes = 16;
inline constexpr std::size_t kDescriptorOffset = 32;
inline constexpr std::size_t kDescriptorBytes = 16;
inline constexpr std::size_t kSlotRegionOffset = 48;

inline constexpr std::size_t kEntryBytes = 20;
inline constexpr std::size_t kSlotHeaderBytes = 12;
inline constexpr std::size_t kCommitWordBytes = 4;

inline constexpr std::uint8_t kFlagPinned = 0x01;
inline constexpr std::uint8_t kFlagLive = 0x02;
inline constexpr std::size_t kEntryFlagsOffset = 12;
inline constexpr std::size_t kDirEntryBytes = 20;
inline constexpr std::size_t kDirEpochOffset = 12;
/// Epoch and flags only: enough to retire a copy.
inline constexpr std::size_t kDirTombstoneBytes = 8;

/// Fixed bytes every persist writes besides payloads and entries; charged to
/// the dirty budget from init onwards.
inline constexpr std::size_t kPersistHeaderBytes = kSlotHeaderBytes + kCommitWordBytes;
/// Bytes of the superblock rewritten by persist on top of the charged state.
inline constexpr std::size_t kSuperblockUpdateBytes = kSlotTableBytes;

/// Budget charge per resident object: the entry persist writes for it.
inline constexpr std::size_t kResidentMetadataBytes = kEntryBytes;
/// Compact per-object footprint (flags + aligned NVM address on a 32-bit
/// target) used when comparing metadata overhead against page-based tracking.
inline constexpr std::size_t kCompactObjectMetadataBytes = 3;

}  // namespace vnv::layout
