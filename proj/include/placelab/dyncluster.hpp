#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "placelab/core.hpp"
#include "placelab/embedding.hpp"
#include "placelab/ingest.hpp"
#include "placelab/segment.hpp"
#include "placelab/setcover.hpp"

namespace placelab {

enum class MergeRule { none, iou_area, player };

inline const char* to_string(MergeRule r) {
  switch (r) {
    case MergeRule::none: return "none";
    case MergeRule::iou_area: return "iou_area";
    case MergeRule::player: return "player";
  }
  return "?";
}

struct LineageRecord {
  std::uint32_t cover = 0;  // set id in the cover instance
  std::int32_t snapshot = -1;
  Label cluster = kNullLabel;
  MergeRule rule = MergeRule::none;
};

struct DynamicClustering {
  std::vector<std::uint32_t> selected;  // set ids in selection order
  std::vector<Label> cover_of_action;   // action -> index into `selected`
  std::vector<Label> cluster_of_cover;  // index into `selected` -> cluster
  std::vector<Label> assignment;        // action -> cluster
  std::vector<LineageRecord> lineage;   // one per selected cover
  std::size_t cluster_count = 0;
};

/// Every action goes to the largest selected set holding it (lower set id on
/// equal sizes). Initially each selected set is its own cluster.
inline DynamicClustering assign_actions(const CoverInstance& inst, std::span<const std::uint32_t> selected) {
  DynamicClustering dc;
  dc.selected.assign(selected.begin(), selected.end());
  std::vector<std::uint32_t> order(selected.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    const auto sa = inst.set_size(selected[a]), sb = inst.set_size(selected[b]);
    return sa != sb ? sa > sb : selected[a] < selected[b];
  });
  dc.cover_of_action.assign(inst.universe_size, kNullLabel);
  for (auto k : order)
    for (ItemId e : inst.set(selected[k]))
      if (dc.cover_of_action[e] == kNullLabel) dc.cover_of_action[e] = Label(k);
  for (std::size_t e = 0; e < inst.universe_size; ++e)
    if (dc.cover_of_action[e] == kNullLabel)
      fail_argument("assign_actions: action " + std::to_string(e) + " is not covered by the selection");
  dc.cluster_of_cover.resize(selected.size());
  std::iota(dc.cluster_of_cover.begin(), dc.cluster_of_cover.end(), Label{0});
  dc.assignment = dc.cover_of_action;
  dc.cluster_count = selected.size();
  for (std::size_t k = 0; k < selected.size(); ++k)
    dc.lineage.push_back({selected[k], inst.origin[selected[k]].snapshot, Label(k), MergeRule::none});
  return dc;
}

struct MergeParams {
  double alpha_iou = 0.6;
  double alpha_as = 0.5;
  double alpha_player = 0.8;  // cosine
};

struct FootprintOverlap {
  double iou = 0;
  double area_similarity = 0;
};

inline FootprintOverlap footprint_overlap(std::size_t a, std::size_t b, std::size_t intersection) {
  FootprintOverlap o;
  const std::size_t uni = a + b - intersection;
  o.iou = uni == 0 ? 0.0 : double(intersection) / double(uni);
  o.area_similarity = (a == 0 || b == 0) ? 0.0 : double(std::min(a, b)) / double(std::max(a, b));
  return o;
}

namespace detail {

/// Calls visit(i, j, |F_i ∩ F_j|) once for every pair i < j of sorted pixel
/// footprints that share at least one pixel.
template <class Visit>
void for_each_overlapping_pair(const std::vector<std::vector<std::uint32_t>>& footprints, Visit&& visit) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> by_pixel;
  for (std::uint32_t i = 0; i < footprints.size(); ++i)
    for (auto p : footprints[i]) by_pixel.emplace_back(p, i);
  std::sort(by_pixel.begin(), by_pixel.end());
  std::vector<std::uint64_t> start;
  std::vector<std::uint32_t> owners;
  // pixel -> range of owners
  std::vector<std::uint32_t> pixel_key;
  for (std::size_t k = 0; k < by_pixel.size();) {
    std::size_t e = k;
    while (e < by_pixel.size() && by_pixel[e].first == by_pixel[k].first) ++e;
    pixel_key.push_back(by_pixel[k].first);
    start.push_back(owners.size());
    for (std::size_t t = k; t < e; ++t) owners.push_back(by_pixel[t].second);
    k = e;
  }
  start.push_back(owners.size());
  std::vector<std::uint32_t> count(footprints.size(), 0);
  std::vector<std::uint32_t> touched;
  for (std::uint32_t i = 0; i < footprints.size(); ++i) {
    touched.clear();
    for (auto p : footprints[i]) {
      const auto pos = std::size_t(std::lower_bound(pixel_key.begin(), pixel_key.end(), p) - pixel_key.begin());
      for (auto k = start[pos]; k < start[pos + 1]; ++k) {
        const auto j = owners[k];
        if (j <= i) continue;
        if (count[j]++ == 0) touched.push_back(j);
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto j : touched) {
      visit(i, j, std::size_t(count[j]));
      count[j] = 0;
    }
  }
}

inline std::vector<std::uint32_t> footprint_of(std::span<const ItemId> actions, const ActionLog& log) {
  std::vector<std::uint32_t> f;
  f.reserve(actions.size());
  for (ItemId a : actions) f.push_back(log.pixel(a));
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

}  // namespace detail

/// Two-phase cover merging. Phase 1 joins covers whose snapshot-cluster
/// footprints have IoU >= alpha_iou and area similarity >= alpha_as. Phase 2
/// joins the resulting groups when the mean embeddings of their players have
/// cosine >= alpha_player and their footprints overlap. Both phases close
/// transitively through union-find.
inline DynamicClustering merge_covers(DynamicClustering dc, const CoverInstance& inst, const ActionLog& log,
                                      const EmbeddingMatrix& players, const MergeParams& params) {
  if (params.alpha_iou < 0 || params.alpha_iou > 1 || params.alpha_as < 0 || params.alpha_as > 1 ||
      params.alpha_player < -1 || params.alpha_player > 1)
    fail_argument("merge_covers: thresholds out of range");
  const std::size_t k = dc.selected.size();
  std::vector<std::vector<std::uint32_t>> fp(k);
  for (std::size_t c = 0; c < k; ++c) fp[c] = detail::footprint_of(inst.set(dc.selected[c]), log);

  DisjointSets phase1(k);
  detail::for_each_overlapping_pair(fp, [&](std::uint32_t i, std::uint32_t j, std::size_t inter) {
    const auto o = footprint_overlap(fp[i].size(), fp[j].size(), inter);
    if (o.iou >= params.alpha_iou && o.area_similarity >= params.alpha_as) phase1.unite(i, j);
  });
  const std::vector<Label> group = phase1.labels();
  const std::size_t groups = k == 0 ? 0 : std::size_t(*std::max_element(group.begin(), group.end())) + 1;

  std::vector<std::vector<std::uint32_t>> gfp(groups);
  std::vector<std::uint32_t> group_members(groups, 0);
  for (std::size_t c = 0; c < k; ++c) {
    auto& f = gfp[std::size_t(group[c])];
    f.insert(f.end(), fp[c].begin(), fp[c].end());
    ++group_members[std::size_t(group[c])];
  }
  for (auto& f : gfp) {
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
  }
  // Mean embedding over the distinct players of each group's actions.
  std::vector<std::vector<PlayerId>> gplayers(groups);
  for (std::size_t a = 0; a < dc.cover_of_action.size(); ++a)
    gplayers[std::size_t(group[std::size_t(dc.cover_of_action[a])])].push_back(log.player[a]);
  EmbeddingMatrix gmean(groups, players.dims);
  for (std::size_t g = 0; g < groups; ++g) {
    auto& ps = gplayers[g];
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    auto dst = gmean.row(g);
    for (PlayerId p : ps) {
      auto src = players.row(p);
      for (std::size_t d = 0; d < players.dims; ++d) dst[d] += src[d];
    }
    if (!ps.empty())
      for (float& v : dst) v /= float(ps.size());
  }
  DisjointSets phase2(groups);
  detail::for_each_overlapping_pair(gfp, [&](std::uint32_t i, std::uint32_t j, std::size_t) {
    if (cosine(gmean.row(i), gmean.row(j)) >= params.alpha_player) phase2.unite(i, j);
  });
  const std::vector<Label> final_group = phase2.labels();
  std::vector<std::uint32_t> final_members(groups, 0);
  for (std::size_t g = 0; g < groups; ++g) ++final_members[std::size_t(final_group[g])];

  dc.cluster_of_cover.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto g = std::size_t(group[c]);
    dc.cluster_of_cover[c] = final_group[g];
    auto& rec = dc.lineage[c];
    rec.cluster = final_group[g];
    // The first phase that joined this cover to anything.
    if (group_members[g] > 1) rec.rule = MergeRule::iou_area;
    else if (final_members[std::size_t(final_group[g])] > 1) rec.rule = MergeRule::player;
    else rec.rule = MergeRule::none;
  }
  for (std::size_t a = 0; a < dc.assignment.size(); ++a)
    dc.assignment[a] = dc.cluster_of_cover[std::size_t(dc.cover_of_action[a])];
  dc.cluster_count = groups == 0 ? 0 : std::size_t(*std::max_element(final_group.begin(), final_group.end())) + 1;
  return dc;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct DynamicParams {
  std::int64_t cadence_ms = 60'000;
  SegmentParams segment;
  Node2VecParams node2vec;
  MergeParams merge;
  std::vector<std::size_t> bands;  // empty: geometric, ratio 8
  unsigned workers = 1;
};

struct StageTiming {
  std::string stage;
  double ms = 0;
};

struct DynamicResult {
  DynamicClustering clustering;
  CoverInstance instance;
  EmbeddingMatrix players;  // raw Node2Vec output; the pipeline compares centred rows
  BandedStats cover_stats;
  std::vector<std::int64_t> snapshot_times;
  std::vector<StageTiming> timings;
};

/// Snapshot times k*cadence below the end of the analysis window, plus the end itself.
inline std::vector<std::int64_t> snapshot_schedule(std::int64_t end, std::int64_t cadence) {
  if (cadence <= 0) fail_argument("cadence must be positive");
  std::vector<std::int64_t> t;
  for (std::int64_t s = cadence; s < end; s += cadence) t.push_back(s);
  t.push_back(end);
  return t;
}

/// Segments every snapshot (contiguous chunks per worker, each with its own
/// replay) and collects the clusters as cover sets in snapshot order.
inline CoverInstance segment_all_snapshots(const ActionLog& log, std::span<const std::int64_t> times,
                                           const EmbeddingMatrix& unit_players, const SegmentParams& params,
                                           unsigned workers) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, times.size()));
  std::vector<CoverInstance> parts(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t lo = times.size() * c / chunks, hi = times.size() * (c + 1) / chunks;
    CoverInstance& part = parts[c];
    part.universe_size = log.size();
    CanvasReplay replay(log);
    for (std::size_t s = lo; s < hi; ++s) {
      replay.advance_to(times[s]);
      const auto seg = segment_snapshot(replay.snapshot(times[s]), log, unit_players, params);
      part.add_partition(seg.partition, std::int32_t(s));
    }
  });
  CoverInstance inst;
  inst.universe_size = log.size();
  for (auto& part : parts) {
    for (std::size_t s = 0; s < part.set_count(); ++s) inst.add_set(part.set(s), part.origin[s]);
    part = CoverInstance{};
  }
  inst.add_fallbacks();
  return inst;
}

inline DynamicResult run_dynamic_clustering(const ActionLog& log, const DynamicParams& params) {
  using clock = std::chrono::steady_clock;
  DynamicResult r;
  auto t0 = clock::now();
  auto mark = [&](const char* stage) {
    const auto now = clock::now();
    r.timings.push_back({stage, std::chrono::duration<double, std::milli>(now - t0).count()});
    t0 = now;
  };
  const PlayerGraph graph = build_player_graph(log);
  mark("player_graph");
  Node2VecParams n2v = params.node2vec;
  n2v.workers = params.workers;
  r.players = embed_players(graph, n2v);
  mark("embed_players");
  const EmbeddingMatrix centered = center_rows(r.players);
  const EmbeddingMatrix unit = normalize_rows(centered);
  r.snapshot_times = snapshot_schedule(log.config.analysis_end(), params.cadence_ms);
  r.instance = segment_all_snapshots(log, r.snapshot_times, unit, params.segment, params.workers);
  mark("segment_snapshots");
  const auto bands = params.bands.empty() ? geometric_bands(r.instance.max_set_size()) : params.bands;
  const auto selected = banded_fgreedy(r.instance, bands, &r.cover_stats);
  mark("set_cover");
  r.clustering = merge_covers(assign_actions(r.instance, selected), r.instance, log, centered, params.merge);
  mark("merge_covers");
  return r;
}

}  // namespace placelab
