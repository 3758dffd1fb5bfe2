#pragma once

#include <cstddef>
#include <cstdint>
#include <list>
#include <span>
#include <vector>

#include "vnv/storage.hpp"

namespace vnv {

enum class AccessMode { kRead, kWrite };

/// Page-granular dirty tracking over a RAM image of fixed size, with one
/// metadata byte per page and no swapping.
class ManagedStatePool {
 public:
  struct Token {
    std::uint32_t id = 0;
  };

  static constexpr std::size_t kHeaderBytes = 4;

  ManagedStatePool(StorageDevice& storage, std::size_t ram_bytes, std::size_t page_size,
                   std::size_t dirty_page_limit, std::size_t storage_offset = 0);

  static bool valid_page_size(std::size_t page_size);
  /// Largest page limit whose checkpoint (pages plus bitmap) fits `budget_bytes`.
  static std::size_t page_limit_for_budget(std::size_t budget_bytes, std::size_t data_bytes, std::size_t page_size);

  Token ms_open(std::size_t offset, std::size_t length, AccessMode mode);
  void ms_close(Token token);
  std::uint64_t ms_checkpoint();

  std::span<const std::byte> read_view(Token token) const;
  std::span<std::byte> write_view(Token token);

  std::size_t ram_bytes() const { return ram_.size(); }
  std::size_t page_size() const { return page_size_; }
  std::size_t page_count() const { return dirty_.size(); }
  std::size_t dirty_page_limit() const { return dirty_page_limit_; }
  std::size_t dirty_page_count() const { return lrd_.size(); }
  bool page_dirty(std::size_t page) const { return dirty_.at(page) != 0; }
  std::size_t metadata_bytes() const { return page_count(); }
  std::uint64_t checkpoint_bound_words() const;
  /// Pages in least-recently-dirtied order.
  std::vector<std::size_t> dirty_pages() const { return {lrd_.begin(), lrd_.end()}; }
  std::span<const std::byte> ram() const { return ram_; }

 private:
  struct OpenRegion {
    bool live = false;
    std::size_t offset = 0;
    std::size_t length = 0;
    AccessMode mode = AccessMode::kRead;
  };

  const OpenRegion& region(Token token) const;
  void mark_dirty(std::size_t page);
  void write_back(std::size_t page);
  bool page_open_for_write(std::size_t page) const;

  StorageDevice* storage_;
  std::size_t page_size_;
  std::size_t dirty_page_limit_;
  std::size_t storage_offset_;
  std::vector<std::byte> ram_;
  std::vector<std::uint8_t> dirty_;
  std::list<std::size_t> lrd_;
  std::vector<std::list<std::size_t>::iterator> lrd_pos_;
  std::vector<OpenRegion> regions_;
  std::uint32_t checkpoints_ = 0;
};

/// An application split into equally sized modules of which exactly one is in
/// RAM; touching another module swaps the whole resident module out and in.
class ModuleSwapApp {
 public:
  ModuleSwapApp(StorageDevice& storage, std::size_t module_count, std::size_t module_bytes = 1024,
                std::size_t storage_offset = 0);

  /// Returns the words transferred to make `target` resident.
  std::uint64_t module_access(std::size_t target, std::size_t offset, std::size_t length, AccessMode mode);

  std::size_t active_module() const { return active_; }
  std::size_t module_bytes() const { return ram_.size(); }
  std::size_t module_count() const { return module_count_; }
  std::span<std::byte> ram() { return ram_; }

 private:
  StorageDevice* storage_;
  std::size_t module_count_;
  std::size_t storage_offset_;
  std::size_t active_ = 0;
  std::vector<std::byte> ram_;
};

/// Checkpointing by copying the whole volatile region.
class UnmanagedRam {
 public:
  UnmanagedRam(StorageDevice& storage, std::size_t ram_bytes, std::size_t storage_offset = 0);

  std::uint64_t checkpoint();
  static std::uint64_t checkpoint_words(std::size_t ram_bytes) { return words_for(ram_bytes); }
  std::span<std::byte> ram() { return ram_; }

 private:
  StorageDevice* storage_;
  std::size_t storage_offset_;
  std::vector<std::byte> ram_;
};

}  // namespace vnv
