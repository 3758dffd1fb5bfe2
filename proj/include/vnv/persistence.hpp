#pragma once

#include <cstdint>

#include "vnv/heap.hpp"
#include "vnv/storage.hpp"

namespace vnv {

PersistReport persist(VnvHeap& heap);
VnvHeap restore(StorageDevice& storage);

/// Worst-case word transfers of one persist() for a heap with this config.
std::uint64_t persist_bound(const HeapConfig& config);

struct EnergyModel {
  double power_mw = 132.0;
  double word_latency_us = 1.0;
};

/// Worst-case energy, in millijoules, of transferring `words` words.
double wcec_mj(std::uint64_t words, const EnergyModel& model = {});
double transfer_time_us(std::uint64_t words, const EnergyModel& model = {});

}  // namespace vnv
