#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "placelab/core.hpp"

namespace placelab {

/// Where a set came from: a cluster of one snapshot, or a singleton added for
/// an action no snapshot showed.
struct SetOrigin {
  std::int32_t snapshot = -1;
  Label cluster = kNullLabel;
  bool fallback = false;
};

/// Set-cover instance in CSR form over the universe 0..universe_size-1.
struct CoverInstance {
  std::size_t universe_size = 0;
  std::vector<std::uint64_t> offsets{0};
  std::vector<ItemId> elements;
  std::vector<SetOrigin> origin;
  std::size_t fallback_count = 0;

  std::size_t set_count() const { return origin.size(); }
  std::span<const ItemId> set(std::size_t s) const {
    return {elements.data() + offsets[s], elements.data() + offsets[s + 1]};
  }
  std::size_t set_size(std::size_t s) const { return std::size_t(offsets[s + 1] - offsets[s]); }
  std::size_t max_set_size() const {
    std::size_t m = 0;
    for (std::size_t s = 0; s < set_count(); ++s) m = std::max(m, set_size(s));
    return m;
  }

  /// Elements are stored sorted and deduplicated.
  void add_set(std::span<const ItemId> items, SetOrigin from) {
    const std::size_t start = elements.size();
    for (ItemId e : items) {
      if (e >= universe_size) fail_argument("cover instance: element outside the universe");
      elements.push_back(e);
    }
    std::sort(elements.begin() + long(start), elements.end());
    elements.erase(std::unique(elements.begin() + long(start), elements.end()), elements.end());
    offsets.push_back(elements.size());
    origin.push_back(from);
  }

  /// Adds partition clusters of one snapshot as sets (null labels skipped).
  void add_partition(const Partition& p, std::int32_t snapshot) {
    Label max_label = kNullLabel;
    for (Label l : p.labels) max_label = std::max(max_label, l);
    if (max_label == kNullLabel) return;
    std::vector<std::vector<ItemId>> buckets(std::size_t(max_label) + 1);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p.labels[i] != kNullLabel) buckets[std::size_t(p.labels[i])].push_back(p.items[i]);
    for (std::size_t c = 0; c < buckets.size(); ++c)
      if (!buckets[c].empty()) add_set(buckets[c], {snapshot, Label(c), false});
  }

  /// Adds a singleton for every uncovered element; returns how many.
  std::size_t add_fallbacks() {
    std::vector<char> covered(universe_size, 0);
    for (ItemId e : elements) covered[e] = 1;
    std::size_t added = 0;
    for (ItemId e = 0; e < universe_size; ++e)
      if (!covered[e]) {
        const ItemId one[1] = {e};
        add_set(one, {-1, kNullLabel, true});
        ++added;
      }
    fallback_count += added;
    return added;
  }
};

inline CoverInstance build_cover_instance(std::span<const Partition> snapshots, std::size_t universe_size) {
  CoverInstance inst;
  inst.universe_size = universe_size;
  for (std::size_t s = 0; s < snapshots.size(); ++s) inst.add_partition(snapshots[s], std::int32_t(s));
  inst.add_fallbacks();
  return inst;
}

/// Textbook greedy: repeatedly take the set with the most uncovered elements,
/// lowest id on ties. Gains are maintained through an element->sets index.
inline std::vector<std::uint32_t> greedy_set_cover(const CoverInstance& inst) {
  const std::size_t m = inst.set_count();
  std::vector<std::uint64_t> eoff(inst.universe_size + 1, 0);
  for (ItemId e : inst.elements) ++eoff[e + 1];
  for (std::size_t e = 0; e < inst.universe_size; ++e) eoff[e + 1] += eoff[e];
  std::vector<std::uint32_t> eset(inst.elements.size());
  {
    auto fill = eoff;
    for (std::uint32_t s = 0; s < m; ++s)
      for (ItemId e : inst.set(s)) eset[fill[e]++] = s;
  }
  std::vector<std::size_t> gain(m);
  for (std::size_t s = 0; s < m; ++s) gain[s] = inst.set_size(s);
  std::vector<char> covered(inst.universe_size, 0);
  std::vector<std::uint32_t> selected;
  for (;;) {
    std::size_t best = m;
    for (std::size_t s = 0; s < m; ++s)
      if (gain[s] > 0 && (best == m || gain[s] > gain[best])) best = s;
    if (best == m) break;
    selected.push_back(std::uint32_t(best));
    for (ItemId e : inst.set(best)) {
      if (covered[e]) continue;
      covered[e] = 1;
      for (auto k = eoff[e]; k < eoff[e + 1]; ++k) --gain[eset[k]];
    }
  }
  return selected;
}

struct BandedStats {
  std::size_t bands = 0;
  std::size_t peak_heap_entries = 0;
  std::size_t deferrals = 0;
  std::size_t heap_entry_bytes = 0;  // bytes per heap entry
  std::size_t peak_heap_bytes() const { return peak_heap_entries * heap_entry_bytes; }
};

/// Geometric band thresholds from the largest set size down to 1.
inline std::vector<std::size_t> geometric_bands(std::size_t max_set_size, std::size_t ratio = 8) {
  if (ratio < 2) fail_argument("bands: ratio must be at least 2");
  std::vector<std::size_t> t{1};
  while (t.back() * ratio <= max_set_size) t.push_back(t.back() * ratio);
  std::reverse(t.begin(), t.end());
  return t;
}

/// Lazy-heap greedy run in bands of decreasing gain. Band i holds the sets
/// whose current gain is at least thresholds[i]; a popped set is committed
/// only while its recomputed gain still reaches the band's lower bound, and
/// is otherwise deferred to a later band. The committed sequence equals
/// greedy_set_cover's.
inline std::vector<std::uint32_t> banded_fgreedy(const CoverInstance& inst, std::span<const std::size_t> thresholds,
                                                 BandedStats* stats = nullptr) {
  if (thresholds.empty() || thresholds.back() != 1) fail_argument("bands: the last threshold must be 1");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] >= thresholds[i - 1]) fail_argument("bands: thresholds must be strictly descending");

  struct Entry {
    std::uint64_t gain;
    std::uint32_t set;
  };
  auto worse = [](const Entry& a, const Entry& b) { return a.gain != b.gain ? a.gain < b.gain : a.set > b.set; };
  BandedStats local;
  local.heap_entry_bytes = sizeof(Entry);
  std::vector<char> covered(inst.universe_size, 0);
  std::vector<char> chosen(inst.set_count(), 0);
  auto current_gain = [&](std::uint32_t s) {
    std::uint64_t g = 0;
    for (ItemId e : inst.set(s)) g += covered[e] ? 0 : 1;
    return g;
  };
  std::vector<std::uint32_t> selected;
  for (std::size_t band = 0; band < thresholds.size(); ++band) {
    const std::uint64_t lower = thresholds[band];
    ++local.bands;
    std::vector<Entry> storage;
    for (std::uint32_t s = 0; s < inst.set_count(); ++s) {
      if (chosen[s]) continue;
      const auto g = current_gain(s);
      if (g >= lower) storage.push_back({g, s});
    }
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse, std::move(storage));
    local.peak_heap_entries = std::max(local.peak_heap_entries, heap.size());
    while (!heap.empty()) {
      const Entry top = heap.top();
      heap.pop();
      const auto g = current_gain(top.set);
      if (g == top.gain) {
        chosen[top.set] = 1;
        selected.push_back(top.set);
        for (ItemId e : inst.set(top.set)) covered[e] = 1;
      } else if (g >= lower) {
        heap.push({g, top.set});
      } else {
        ++local.deferrals;
      }
    }
  }
  if (stats) *stats = local;
  return selected;
}

}  // namespace placelab
