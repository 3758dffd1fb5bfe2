#pragma once

// Independent re-derivations used by the unit tests. Nothing here calls into
// the code it checks except through public observers.

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "vnv/extent_allocator.hpp"
#include "vnv/heap.hpp"

namespace oracle {

inline std::size_t round_up4(std::size_t n) { return n % 4 == 0 ? n : n + (4 - n % 4); }

/// dirty = fixed persist header + 20 B per resident + aligned payload per modified object.
inline std::size_t expected_dirty(const vnv::VnvHeap& heap) {
  std::size_t dirty = 16;
  for (const auto& h : heap.handles()) {
    auto m = heap.meta(h);
    if (m.resident) dirty += 20;
    if (m.modified) dirty += round_up4(m.size_bytes);
  }
  return dirty;
}

/// Empty string when allocated and free extents tile [base, base+length) with
/// no overlap and no two adjacent free extents; otherwise a description.
inline std::string tiling_error(const vnv::ExtentAllocator& a) {
  std::vector<std::pair<vnv::Extent, bool>> all;
  for (auto e : a.free_extents()) all.push_back({e, true});
  for (auto e : a.allocated_extents()) all.push_back({e, false});
  std::sort(all.begin(), all.end(), [](auto& x, auto& y) { return x.first.offset < y.first.offset; });
  std::size_t cursor = a.base();
  bool prev_free = false;
  std::size_t free_sum = 0;
  for (auto& [e, is_free] : all) {
    if (e.offset != cursor) return "gap or overlap at " + std::to_string(cursor);
    if (e.length == 0) return "empty extent at " + std::to_string(e.offset);
    if (is_free && prev_free) return "uncoalesced free extents at " + std::to_string(e.offset);
    if (is_free) free_sum += e.length;
    prev_free = is_free;
    cursor = e.end();
  }
  if (cursor != a.base() + a.length()) return "region not fully covered";
  if (free_sum != a.free_bytes()) return "free byte count drifted";
  return {};
}

/// Cache extents of residents: disjoint, 20 reserved bytes before the payload.
inline std::string cache_layout_error(const vnv::VnvHeap& heap) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& h : heap.handles()) {
    auto m = heap.meta(h);
    if (!m.resident) continue;
    if (m.cache_offset < 20) return "payload without reserved prefix";
    spans.push_back({m.cache_offset - 20, m.cache_offset + round_up4(m.size_bytes)});
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) return "overlapping cache extents";
  }
  if (!spans.empty() && spans.back().second > heap.config().cache_size_bytes) return "cache overflow";
  return {};
}

/// Expected heap contents, keyed by object id.
using Shadow = std::map<vnv::ObjectId, std::vector<std::byte>>;

inline Shadow snapshot(vnv::VnvHeap& heap) {
  Shadow out;
  for (const auto& h : heap.handles()) {
    auto g = heap.get_ref(h);
    out[h.id()].assign(g.bytes().begin(), g.bytes().end());
  }
  return out;
}

}  // namespace oracle
