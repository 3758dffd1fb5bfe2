#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vnv/heap.hpp"
#include "vnv/persistence.hpp"
#include "vnv/workloads.hpp"

namespace vnv::bench {

/// One measurement. Word counts are per repetition; time and energy are
/// derived from them with an EnergyModel when the record is written out.
struct BenchRecord {
  std::string benchmark;
  std::string backend;
  std::string variant;
  std::optional<std::size_t> cache_size;
  std::optional<std::size_t> dirty_limit;
  std::optional<std::size_t> object_size;
  std::optional<std::size_t> page_size;
  std::optional<std::string> pattern;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> initial_len;
  std::optional<std::size_t> metadata_bytes;
  double words_read = 0;
  double words_written = 0;
  std::uint64_t reps = 1;

  double words() const { return words_read + words_written; }
};

std::string csv_header();
std::string csv_row(const BenchRecord& r, const EnergyModel& model);
void write_csv(std::ostream& out, const std::vector<BenchRecord>& records, const EnergyModel& model);

// ---- object access ----

enum class AccessCase { kBest, kBad, kWorst };
AccessCase parse_access_case(const std::string& name);
std::string to_string(AccessCase c);

inline constexpr std::size_t kAccessMaxObject = 1024;
/// Cache (and dirty budget) for the access benchmark: one 1 KiB object plus
/// its metadata and the persist header.
inline constexpr std::size_t kAccessCacheBytes = kAccessMaxObject + 20 + 16;

BenchRecord run_access_bench(AccessCase which, std::size_t object_size, const std::string& backend);

// ---- queue ----

BenchRecord run_queue_bench(std::size_t initial_len, const std::string& backend, std::size_t reps = 64,
                            std::size_t cache_size = 4096, std::optional<std::size_t> dirty_limit = {});

// ---- persist ----

enum class PersistMode { kVaryLimit, kVaryRam };
PersistMode parse_persist_mode(const std::string& name);
std::vector<std::size_t> default_persist_values(PersistMode mode);

/// Maximum persist cost over a workload that keeps the dirty budget full,
/// followed by the unmanaged-RAM checkpoint for the same RAM size.
std::vector<BenchRecord> run_persist_bench(PersistMode mode, const std::vector<std::size_t>& values,
                                           std::uint64_t seed = 1, std::size_t rounds = 32);
BenchRecord measure_saturated_persist(std::size_t cache_size, std::size_t dirty_limit, std::uint64_t seed,
                                      std::size_t rounds);

// ---- key-value store ----

inline constexpr std::size_t kKvsCacheBytes = 64 * 1024;
inline constexpr std::size_t kKvsDefaultOps = 4096;

std::size_t vnv_metadata_bytes(std::size_t object_count);
std::size_t managed_state_metadata_bytes(std::size_t data_bytes, std::size_t page_size);

BenchRecord run_kvs_bench(const std::string& backend, std::optional<std::size_t> page_size, PatternKind pattern,
                          std::uint64_t seed, std::size_t n_ops = kKvsDefaultOps);

// ---- property suites ----

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct TraceStats {
  std::size_t operations = 0;
  std::size_t dirty_violations = 0;
  std::size_t persists = 0;
  std::size_t bound_violations = 0;
  std::size_t injected_failures = 0;
  std::uint64_t max_persist_words = 0;
  std::size_t max_dirty_bytes = 0;
};

/// Random alloc/dealloc/get_ref/get_mut/release trace with periodic persists,
/// each armed with a fault budget of exactly the bound.
TraceStats run_heap_trace(std::uint64_t seed, std::size_t operations, const HeapConfig& config);

struct GuardStats {
  std::size_t attempts = 0;
  std::size_t violations = 0;
  std::vector<std::string> messages;
};
GuardStats run_guard_contract(std::uint64_t seed, std::size_t attempts);

struct CrashReport {
  std::size_t iterations = 0;
  std::size_t passed = 0;
  std::vector<std::string> failures;
  bool fault_caught = false;
  bool previous_restored = false;
};
CrashReport run_crash_suite(std::uint64_t seed, std::size_t iterations, const HeapConfig& config = {});

double unequal_total_variation(std::size_t draws, std::uint64_t seed);

std::vector<CheckResult> run_all_checks(std::uint64_t seed);

}  // namespace vnv::bench
