#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "placelab/core.hpp"
#include "placelab/ingest.hpp"

namespace placelab {

// ---------------------------------------------------------------------------
// Small numeric helpers

struct IcdfPoint {
  double x = 0;
  double fraction = 0;  // share of values >= x
};

/// `per_decade` log-spaced points covering [lo, hi].
inline std::vector<double> log_points(double lo, double hi, std::size_t per_decade = 10) {
  if (!(lo > 0) || !(hi >= lo)) fail_argument("log_points: need 0 < lo <= hi");
  std::vector<double> pts;
  const double a = std::log10(lo), b = std::log10(hi);
  const auto steps = std::size_t(std::ceil((b - a) * double(per_decade)));
  for (std::size_t i = 0; i <= steps; ++i) pts.push_back(std::pow(10.0, a + (b - a) * double(i) / double(std::max<std::size_t>(steps, 1))));
  if (steps == 0) pts.resize(1);
  return pts;
}

inline std::vector<IcdfPoint> icdf(std::vector<double> values, std::span<const double> points) {
  std::sort(values.begin(), values.end());
  std::vector<IcdfPoint> out;
  if (values.empty()) return out;
  for (double x : points) {
    const auto ge = values.end() - std::lower_bound(values.begin(), values.end(), x);
    out.push_back({x, double(ge) / double(values.size())});
  }
  return out;
}

/// ICDF evaluated at each distinct value.
inline std::vector<IcdfPoint> icdf(std::vector<double> values) {
  std::vector<double> pts = values;
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return icdf(std::move(values), pts);
}

struct LineFit {
  double slope = 0;
  double intercept = 0;
  std::size_t n = 0;
};

inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  LineFit f;
  f.n = xs.size();
  if (xs.size() < 2) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(xs.size());
  my /= double(xs.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

inline LineFit fit_through_origin(std::span<const double> xs, std::span<const double> ys) {
  LineFit f;
  f.n = xs.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += xs[i] * ys[i];
    sxx += xs[i] * xs[i];
  }
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  return f;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void check_labels(const ActionLog& log, std::span<const Label> labels) {
  if (labels.size() != log.size())
    fail_argument("labels cover " + std::to_string(labels.size()) + " actions, log has " + std::to_string(log.size()));
}

/// Color each action's pixel showed just before it was placed (background if untouched).
inline std::vector<std::uint8_t> previous_colors(const ActionLog& log) {
  CanvasReplay replay(log);
  std::vector<std::uint8_t> before(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) before[i] = replay.apply_next();
  return before;
}

// ---------------------------------------------------------------------------
// Engagement

struct ActivityRates {
  std::vector<double> rate;  // actions per hour, per player
  std::vector<IcdfPoint> curve;
};

/// Per-player action rate. The denominator is the player's own first-to-last
/// span (at least one hour) unless `full_duration`.
inline ActivityRates activity_icdf(const ActionLog& log, bool full_duration = false) {
  ActivityRates r;
  if (log.empty()) return r;
  const std::size_t n = log.player_count();
  std::vector<std::uint64_t> count(n, 0);
  std::vector<std::int64_t> first(n, std::numeric_limits<std::int64_t>::max()), last(n, 0);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto p = log.player[i];
    ++count[p];
    first[p] = std::min(first[p], log.time[i]);
    last[p] = std::max(last[p], log.time[i]);
  }
  const double total_hours = std::max(1.0, double(log.config.duration_ms) / double(kMsPerHour));
  r.rate.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double hours = full_duration ? total_hours : std::max(1.0, double(last[p] - first[p]) / double(kMsPerHour));
    r.rate[p] = double(count[p]) / hours;
  }
  const double hi = *std::max_element(r.rate.begin(), r.rate.end());
  const double lo = *std::min_element(r.rate.begin(), r.rate.end());
  r.curve = icdf(r.rate, log_points(std::max(lo, 1e-3), std::max(hi, std::max(lo, 1e-3))));
  return r;
}

enum class ActionClass : std::uint8_t { final, match, adversary };

struct ProgressionBucket {
  std::int64_t hour = 0;
  std::uint64_t final = 0, match = 0, adversary = 0;
  std::uint64_t total() const { return final + match + adversary; }
  // Percentages of all actions, for this bucket alone and up to its end.
  double final_pct = 0, match_pct = 0, adversary_pct = 0;
  double final_cum_pct = 0, match_cum_pct = 0, adversary_cum_pct = 0;
};

struct Progression {
  std::vector<ActionClass> classes;
  std::vector<ProgressionBucket> buckets;
};

/// final: last action on its pixel; match: overwritten, but its color is the
/// final color of the pixel; adversary: anything else.
inline Progression classify_actions(const ActionLog& log) {
  Progression pr;
  const std::size_t n = log.size();
  pr.classes.resize(n);
  CanvasReplay replay(log);
  replay.advance_to(std::numeric_limits<std::int64_t>::max());
  const auto& top = replay.top();
  const auto& fin = replay.color();
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = log.pixel(i);
    if (top[p] == ActionId(i)) pr.classes[i] = ActionClass::final;
    else if (log.color[i] == fin[p]) pr.classes[i] = ActionClass::match;
    else pr.classes[i] = ActionClass::adversary;
  }
  if (n == 0) return pr;
  const std::int64_t end = std::max(log.config.duration_ms, log.time.back() + 1);
  const auto hours = std::size_t((end + kMsPerHour - 1) / kMsPerHour);
  pr.buckets.resize(hours);
  for (std::size_t h = 0; h < hours; ++h) pr.buckets[h].hour = std::int64_t(h);
  for (std::size_t i = 0; i < n; ++i) {
    auto& b = pr.buckets[std::size_t(log.time[i] / kMsPerHour)];
    switch (pr.classes[i]) {
      case ActionClass::final: ++b.final; break;
      case ActionClass::match: ++b.match; break;
      case ActionClass::adversary: ++b.adversary; break;
    }
  }
  const double total = double(n);
  std::uint64_t cf = 0, cm = 0, ca = 0;
  for (auto& b : pr.buckets) {
    cf += b.final;
    cm += b.match;
    ca += b.adversary;
    b.final_pct = 100.0 * double(b.final) / total;
    b.match_pct = 100.0 * double(b.match) / total;
    b.adversary_pct = 100.0 * double(b.adversary) / total;
    b.final_cum_pct = 100.0 * double(cf) / total;
    b.match_cum_pct = 100.0 * double(cm) / total;
    b.adversary_cum_pct = 100.0 * double(ca) / total;
  }
  return pr;
}

inline std::vector<std::uint32_t> activity_heatmap(const ActionLog& log) {
  std::vector<std::uint32_t> grid(log.config.full_area(), 0);
  for (std::size_t i = 0; i < log.size(); ++i) ++grid[log.pixel(i)];
  return grid;
}

// ---------------------------------------------------------------------------
// Cluster footprints and area timelines

/// Pixels touched by a cluster's actions, each with the cluster's reference
/// color there: the most frequent color among its actions on that pixel,
/// earliest-used color on ties.
struct ClusterFootprint {
  Label id = kNullLabel;
  std::vector<std::uint32_t> pixels;  // sorted
  std::vector<std::uint8_t> reference;
  std::size_t size() const { return pixels.size(); }
  std::optional<std::uint8_t> reference_at(std::uint32_t pixel) const {
    auto it = std::lower_bound(pixels.begin(), pixels.end(), pixel);
    if (it == pixels.end() || *it != pixel) return std::nullopt;
    return reference[std::size_t(it - pixels.begin())];
  }
};

struct FootprintIndex {
  std::vector<ClusterFootprint> clusters;  // ascending id
  std::size_t find(Label id) const {
    auto it = std::lower_bound(clusters.begin(), clusters.end(), id,
                               [](const ClusterFootprint& c, Label v) { return c.id < v; });
    return it != clusters.end() && it->id == id ? std::size_t(it - clusters.begin()) : clusters.size();
  }
};

inline FootprintIndex build_footprints(const ActionLog& log, std::span<const Label> labels) {
  check_labels(log, labels);
  struct Row {
    Label label;
    std::uint32_t pixel;
    std::uint8_t color;
    std::uint32_t action;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < log.size(); ++i)
    if (labels[i] != kNullLabel) rows.push_back({labels[i], log.pixel(i), log.color[i], std::uint32_t(i)});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.label != b.label) return a.label < b.label;
    if (a.pixel != b.pixel) return a.pixel < b.pixel;
    if (a.color != b.color) return a.color < b.color;
    return a.action < b.action;
  });
  FootprintIndex idx;
  for (std::size_t k = 0; k < rows.size();) {
    std::size_t e = k;
    while (e < rows.size() && rows[e].label == rows[k].label && rows[e].pixel == rows[k].pixel) ++e;
    if (idx.clusters.empty() || idx.clusters.back().id != rows[k].label) idx.clusters.push_back({rows[k].label, {}, {}});
    // Within [k, e) colors are grouped; pick the largest group, earliest first action on ties.
    std::size_t best_count = 0;
    std::uint32_t best_first = 0;
    std::uint8_t best_color = 0;
    for (std::size_t g = k; g < e;) {
      std::size_t h = g;
      while (h < e && rows[h].color == rows[g].color) ++h;
      const std::size_t count = h - g;
      const std::uint32_t first = rows[g].action;
      if (count > best_count || (count == best_count && first < best_first)) {
        best_count = count;
        best_first = first;
        best_color = rows[g].color;
      }
      g = h;
    }
    idx.clusters.back().pixels.push_back(rows[k].pixel);
    idx.clusters.back().reference.push_back(best_color);
    k = e;
  }
  return idx;
}

struct AreaPoint {
  std::int64_t time = 0;
  std::uint32_t area = 0;
};

/// Number of footprint pixels currently showing their reference color (an
/// untouched pixel never counts), as a step function of time.
struct AreaTimeline {
  std::vector<AreaPoint> points;  // strictly increasing time
  std::uint32_t max_area = 0;
  std::uint32_t final_area = 0;

  std::uint32_t at(std::int64_t t) const {
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](std::int64_t v, const AreaPoint& p) { return v < p.time; });
    return it == points.begin() ? 0u : std::prev(it)->area;
  }
  /// Largest area over (-inf, t].
  std::uint32_t max_until(std::int64_t t) const {
    std::uint32_t m = 0;
    for (const auto& p : points) {
      if (p.time > t) break;
      m = std::max(m, p.area);
    }
    return m;
  }
};

inline std::vector<AreaTimeline> area_timelines(const ActionLog& log, const FootprintIndex& fp) {
  const std::size_t area = log.config.full_area();
  std::vector<std::uint32_t> offsets(area + 1, 0);
  for (const auto& c : fp.clusters)
    for (auto p : c.pixels) ++offsets[p + 1];
  for (std::size_t p = 0; p < area; ++p) offsets[p + 1] += offsets[p];
  struct Ref {
    std::uint32_t cluster;
    std::uint8_t color;
  };
  std::vector<Ref> refs(offsets.back());
  {
    auto fill = offsets;
    for (std::uint32_t c = 0; c < fp.clusters.size(); ++c)
      for (std::size_t k = 0; k < fp.clusters[c].size(); ++k)
        refs[fill[fp.clusters[c].pixels[k]]++] = {c, fp.clusters[c].reference[k]};
  }
  constexpr std::uint16_t kUntouched = 0xffff;
  std::vector<std::uint16_t> current(area, kUntouched);
  std::vector<AreaTimeline> out(fp.clusters.size());
  std::vector<std::uint32_t> value(fp.clusters.size(), 0);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto p = log.pixel(i);
    const std::uint16_t before = current[p];
    const std::uint16_t now = log.color[i];
    current[p] = now;
    if (before == now) continue;
    for (auto k = offsets[p]; k < offsets[p + 1]; ++k) {
      const auto [c, ref] = refs[k];
      const bool was = before == ref, is = now == ref;
      if (was == is) continue;
      value[c] = is ? value[c] + 1 : value[c] - 1;
      auto& pts = out[c].points;
      if (!pts.empty() && pts.back().time == log.time[i]) pts.back().area = value[c];
      else pts.push_back({log.time[i], value[c]});
      out[c].max_area = std::max(out[c].max_area, value[c]);
    }
  }
  for (std::size_t c = 0; c < out.size(); ++c) out[c].final_area = value[c];
  return out;
}

// ---------------------------------------------------------------------------
// Coalitions

struct CoalitionRecord {
  Label artwork = kNullLabel;
  std::vector<PlayerId> members;              // sorted
  std::vector<std::uint32_t> member_actions;  // labeled actions per member
  AreaTimeline area;
  std::size_t actions = 0, agreeing = 0, wasted = 0, adversarial = 0;
  std::size_t size() const { return members.size(); }
};

/// Members are the players with at least one labeled action that matches
/// the final color of its pixel. Agreeing actions match the final color;
/// wasted ones are agreeing actions placed on a pixel already showing it.
inline std::vector<CoalitionRecord> build_coalitions(const ActionLog& log, std::span<const Label> labels) {
  const FootprintIndex fp = build_footprints(log, labels);
  auto timelines = area_timelines(log, fp);
  const auto before = previous_colors(log);
  const auto fin = final_colors(log);
  std::vector<CoalitionRecord> recs(fp.clusters.size());
  std::vector<std::unordered_map<PlayerId, std::pair<std::uint32_t, bool>>> per(fp.clusters.size());
  for (std::size_t c = 0; c < recs.size(); ++c) {
    recs[c].artwork = fp.clusters[c].id;
    recs[c].area = std::move(timelines[c]);
  }
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (labels[i] == kNullLabel) continue;
    const std::size_t c = fp.find(labels[i]);
    auto& r = recs[c];
    ++r.actions;
    const bool agree = log.color[i] == fin[log.pixel(i)];
    auto& m = per[c][log.player[i]];
    ++m.first;
    if (agree) {
      ++r.agreeing;
      m.second = true;
      if (before[i] == log.color[i]) ++r.wasted;
    } else {
      ++r.adversarial;
    }
  }
  for (std::size_t c = 0; c < recs.size(); ++c) {
    std::vector<std::pair<PlayerId, std::uint32_t>> ms;
    for (const auto& [p, v] : per[c])
      if (v.second) ms.emplace_back(p, v.first);
    std::sort(ms.begin(), ms.end());
    for (const auto& [p, n] : ms) {
      recs[c].members.push_back(p);
      recs[c].member_actions.push_back(n);
    }
  }
  return recs;
}

struct CostPoint {
  Label artwork = kNullLabel;
  std::size_t size = 0;
  double ratio = 0;
};

struct CoordinationCost {
  std::vector<CostPoint> points;
  std::vector<Label> excluded;  // coalitions without agreeing actions
  LineFit fit;                  // ratio against coalition size
};

inline CoordinationCost coordination_cost(std::span<const CoalitionRecord> coalitions) {
  CoordinationCost cc;
  std::vector<double> xs, ys;
  for (const auto& r : coalitions) {
    if (r.agreeing == 0) {
      cc.excluded.push_back(r.artwork);
      continue;
    }
    const double ratio = double(r.wasted) / double(r.agreeing);
    cc.points.push_back({r.artwork, r.size(), ratio});
    xs.push_back(double(r.size()));
    ys.push_back(ratio);
  }
  cc.fit = fit_line(xs, ys);
  return cc;
}

struct SizeBin {
  double lo = 1, hi = std::numeric_limits<double>::infinity();  // [lo, hi)
};

inline std::vector<SizeBin> default_loafing_bins() { return {{1, 1e2}, {1e2, 1e4}, {1e4, std::numeric_limits<double>::infinity()}}; }

struct LoafingBin {
  SizeBin bin;
  std::vector<double> medians;  // one per coalition in the bin
  std::vector<IcdfPoint> curve;
  bool empty() const { return medians.empty(); }
};

/// Per size bin, the ICDF of per-coalition median member action counts,
/// evaluated at every median seen in any bin so bins can be compared pointwise.
inline std::vector<LoafingBin> loafing_icdf(std::span<const CoalitionRecord> coalitions,
                                            std::span<const SizeBin> bins) {
  std::vector<LoafingBin> out;
  std::vector<double> all;
  for (const auto& b : bins) out.push_back({b, {}, {}});
  for (const auto& r : coalitions) {
    if (r.members.empty()) continue;
    std::vector<double> counts(r.member_actions.begin(), r.member_actions.end());
    const double m = median(counts);
    for (auto& b : out)
      if (double(r.size()) >= b.bin.lo && double(r.size()) < b.bin.hi) {
        b.medians.push_back(m);
        all.push_back(m);
        break;
      }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (auto& b : out) b.curve = icdf(b.medians, all);
  return out;
}

struct HistogramBin {
  double lo = 0, hi = 0;
  std::size_t count = 0;
  double mass = 0;  // count / total
};

struct SizeDistribution {
  std::int64_t time = 0;
  std::size_t population = 0;
  std::vector<Label> clusters;
  std::vector<double> normalized;  // per active cluster
  std::vector<HistogramBin> histogram;
};

/// Coalition sizes at time t (distinct players with a labeled action by t)
/// over the number of distinct players active by t, binned log-uniformly.
inline SizeDistribution coalition_size_distribution(const ActionLog& log, std::span<const Label> labels,
                                                    std::int64_t t, std::size_t bins_per_decade = 5) {
  check_labels(log, labels);
  if (t < 0 || t > log.config.duration_ms) fail_argument("coalition sizes: time outside the game");
  SizeDistribution d;
  d.time = t;
  const std::size_t end = log.upper_bound(t);
  std::vector<char> seen(log.player_count(), 0);
  std::vector<std::pair<Label, PlayerId>> pairs;
  for (std::size_t i = 0; i < end; ++i) {
    if (!seen[log.player[i]]) {
      seen[log.player[i]] = 1;
      ++d.population;
    }
    if (labels[i] != kNullLabel) pairs.emplace_back(labels[i], log.player[i]);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  for (std::size_t k = 0; k < pairs.size();) {
    std::size_t e = k;
    while (e < pairs.size() && pairs[e].first == pairs[k].first) ++e;
    d.clusters.push_back(pairs[k].first);
    d.normalized.push_back(double(e - k) / double(d.population));
    k = e;
  }
  if (d.normalized.empty()) return d;
  const double lo = *std::min_element(d.normalized.begin(), d.normalized.end());
  const double floor_decade = std::floor(std::log10(lo));
  const auto nb = std::size_t(std::max(1.0, -floor_decade * double(bins_per_decade)));
  for (std::size_t b = 0; b < nb; ++b) {
    const double a = floor_decade + (-floor_decade) * double(b) / double(nb);
    const double z = floor_decade + (-floor_decade) * double(b + 1) / double(nb);
    d.histogram.push_back({std::pow(10.0, a), std::pow(10.0, z), 0, 0});
  }
  if (floor_decade == 0) d.histogram.front().lo = 1.0;
  for (double v : d.normalized) {
    std::size_t b = 0;
    while (b + 1 < d.histogram.size() && v >= d.histogram[b].hi) ++b;
    ++d.histogram[b].count;
  }
  for (auto& h : d.histogram) h.mass = double(h.count) / double(d.normalized.size());
  return d;
}

struct ConflictBucket {
  std::int64_t hour = 0;
  std::uint64_t collaborative = 0, adversarial = 0;
};

/// Hourly counts of every action on the cluster's footprint, split by
/// whether it paints the cluster's reference color.
inline std::vector<ConflictBucket> conflict_timeline(const ActionLog& log, std::span<const Label> labels,
                                                     Label cluster) {
  const FootprintIndex fp = build_footprints(log, labels);
  const std::size_t c = fp.find(cluster);
  if (c == fp.clusters.size()) fail_argument("conflict timeline: unknown cluster " + std::to_string(cluster));
  const auto& f = fp.clusters[c];
  const std::int64_t end = log.empty() ? 0 : std::max(log.config.duration_ms, log.time.back() + 1);
  std::vector<ConflictBucket> out(std::size_t((end + kMsPerHour - 1) / kMsPerHour));
  for (std::size_t h = 0; h < out.size(); ++h) out[h].hour = std::int64_t(h);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto ref = f.reference_at(log.pixel(i));
    if (!ref) continue;
    auto& b = out[std::size_t(log.time[i] / kMsPerHour)];
    if (log.color[i] == *ref) ++b.collaborative;
    else ++b.adversarial;
  }
  return out;
}

struct ArtworkEffort {
  Label artwork = kNullLabel;
  std::size_t actions = 0;
  std::size_t pixels = 0;  // final-canvas pixels whose top action carries the label
};

struct ActionsVsPixels {
  std::vector<ArtworkEffort> rows;
  LineFit fit;  // actions = slope * pixels
};

inline ActionsVsPixels actions_vs_pixels(const ActionLog& log, std::span<const Label> labels) {
  check_labels(log, labels);
  ActionsVsPixels out;
  std::map<Label, ArtworkEffort> by;
  for (std::size_t i = 0; i < log.size(); ++i)
    if (labels[i] != kNullLabel) {
      auto& e = by[labels[i]];
      e.artwork = labels[i];
      ++e.actions;
    }
  CanvasReplay replay(log);
  replay.advance_to(std::numeric_limits<std::int64_t>::max());
  for (ActionId a : replay.top())
    if (a != kNoAction && labels[a] != kNullLabel) ++by[labels[a]].pixels;
  std::vector<double> xs, ys;
  for (const auto& [id, e] : by) {
    out.rows.push_back(e);
    xs.push_back(double(e.pixels));
    ys.push_back(double(e.actions));
  }
  out.fit = fit_through_origin(xs, ys);
  return out;
}

// ---------------------------------------------------------------------------
// Rollups

struct ArtworkSummary {
  Label artwork = kNullLabel;
  std::optional<std::string> subreddit;
  double players = 0;
  double area = 0;
};

struct CategoryRow {
  std::string category;
  std::size_t artworks = 0;
  double mean_players = 0;
  double mean_area = 0;
};

inline std::vector<CategoryRow> category_rollup(std::span<const ArtworkSummary> artworks,
                                                const std::map<std::string, std::string>& category_of) {
  std::map<std::string, CategoryRow> by;
  for (const auto& a : artworks) {
    std::string cat = "Other";
    if (a.subreddit)
      if (auto it = category_of.find(*a.subreddit); it != category_of.end()) cat = it->second;
    auto& row = by[cat];
    row.category = cat;
    ++row.artworks;
    row.mean_players += a.players;
    row.mean_area += a.area;
  }
  std::vector<CategoryRow> out;
  for (auto& [k, row] : by) {
    row.mean_players /= double(row.artworks);
    row.mean_area /= double(row.artworks);
    out.push_back(row);
  }
  return out;
}

struct GameSummary {
  std::size_t actions = 0;
  std::size_t players = 0;
  double actions_per_player = 0;
  std::size_t artworks = 0;
  double mean_coalition_size = 0;
  double final_fraction = 0;
};

inline GameSummary summarize(const ActionLog& log, std::span<const CoalitionRecord> coalitions) {
  GameSummary s;
  s.actions = log.size();
  s.players = log.player_count();
  s.actions_per_player = s.players ? double(s.actions) / double(s.players) : 0.0;
  s.artworks = coalitions.size();
  double total = 0;
  for (const auto& c : coalitions) total += double(c.size());
  s.mean_coalition_size = coalitions.empty() ? 0.0 : total / double(coalitions.size());
  if (!log.empty()) {
    CanvasReplay replay(log);
    replay.advance_to(std::numeric_limits<std::int64_t>::max());
    std::size_t finals = 0;
    for (ActionId a : replay.top()) finals += a != kNoAction;
    s.final_fraction = double(finals) / double(log.size());
  }
  return s;
}

}  // namespace placelab
