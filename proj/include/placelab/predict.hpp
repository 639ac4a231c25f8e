#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "placelab/core.hpp"
#include "placelab/ingest.hpp"
#include "placelab/metrics.hpp"

namespace placelab {

inline constexpr std::size_t kFeatureCount = 4;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames{"start_time", "artwork_size", "coalition_size",
                                                                      "color_entropy"};

struct SuccessExample {
  std::int64_t snapshot_time = 0;
  Label cluster = kNullLabel;
  double start_time = 0;  // first action of the cluster, as a fraction of the game
  double artwork_size = 0;
  double coalition_size = 0;
  double color_entropy = 0;  // bits
  bool successful = false;

  std::array<double, kFeatureCount> features() const { return {start_time, artwork_size, coalition_size, color_entropy}; }
};

/// Base-2 entropy of a histogram; 0 for a single occupied bin or none.
inline double entropy_bits(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0;
  for (auto c : counts)
    if (c > 0) {
      const double p = double(c) / double(total);
      h -= p * std::log2(p);
    }
  return std::max(0.0, h);
}

/// A cluster succeeds when it ends holding at least 40% of its peak area.
inline bool retains_area(std::uint32_t final_area, std::uint32_t max_area) {
  return 10.0 * double(final_area) >= 4.0 * double(max_area);
}

/// `count` distinct integer times drawn uniformly from [0, end), sorted.
inline std::vector<std::int64_t> sample_snapshot_times(std::int64_t end, std::size_t count, std::uint64_t seed) {
  if (end <= 0) fail_argument("snapshots: empty time range");
  if (std::int64_t(count) > end) fail_argument("snapshots: more samples than distinct times");
  std::mt19937_64 rng(mix_seed(seed, 0x5a));
  std::uniform_int_distribution<std::int64_t> pick(0, end - 1);
  std::set<std::int64_t> chosen;
  while (chosen.size() < count) chosen.insert(pick(rng));
  return {chosen.begin(), chosen.end()};
}

struct ExtractParams {
  std::size_t snapshots = 100;
  std::uint32_t min_area = 20;  // matching pixels for a cluster to count as active
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct ExtractResult {
  std::vector<SuccessExample> examples;
  std::vector<std::int64_t> snapshot_times;
  std::vector<std::size_t> rows_per_snapshot;
  std::vector<AreaTimeline> timelines;  // parallel to `clusters`
  std::vector<Label> clusters;
};

/// One example per (sampled snapshot, cluster active in it).
inline ExtractResult extract_examples(const ActionLog& log, std::span<const Label> labels, const ExtractParams& params) {
  const FootprintIndex fp = build_footprints(log, labels);
  ExtractResult r;
  r.timelines = area_timelines(log, fp);
  for (const auto& c : fp.clusters) r.clusters.push_back(c.id);
  const std::size_t k = fp.clusters.size();
  const double duration = double(std::max<std::int64_t>(1, log.config.duration_ms));

  // Per cluster: first labeled action time, and each member's first labeled time (sorted).
  std::vector<std::int64_t> first(k, std::numeric_limits<std::int64_t>::max());
  std::vector<std::vector<std::int64_t>> joins(k);
  {
    std::vector<std::unordered_set<PlayerId>> seen(k);
    for (std::size_t i = 0; i < log.size(); ++i) {
      if (labels[i] == kNullLabel) continue;
      const auto c = fp.find(labels[i]);
      first[c] = std::min(first[c], log.time[i]);
      if (seen[c].insert(log.player[i]).second) joins[c].push_back(log.time[i]);
    }
  }

  r.snapshot_times = sample_snapshot_times(log.config.duration_ms, params.snapshots, params.seed);
  const std::size_t n = r.snapshot_times.size();
  std::vector<std::vector<SuccessExample>> rows(n);
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(params.workers, n));
  parallel_for(chunks, params.workers, [&](std::size_t chunk) {
    CanvasReplay replay(log);
    std::vector<std::uint64_t> hist;
    for (std::size_t s = n * chunk / chunks; s < n * (chunk + 1) / chunks; ++s) {
      const std::int64_t t = r.snapshot_times[s];
      replay.advance_to(t);
      const auto& top = replay.top();
      const auto& color = replay.color();
      for (std::size_t c = 0; c < k; ++c) {
        const std::uint32_t area = r.timelines[c].at(t);
        if (area < params.min_area) continue;
        hist.assign(log.config.rgb_table().size(), 0);
        for (auto p : fp.clusters[c].pixels)
          if (top[p] != kNoAction) ++hist[color[p]];
        SuccessExample ex;
        ex.snapshot_time = t;
        ex.cluster = fp.clusters[c].id;
        ex.start_time = std::clamp(double(first[c]) / duration, 0.0, 1.0);
        ex.artwork_size = area;
        ex.coalition_size = double(std::upper_bound(joins[c].begin(), joins[c].end(), t) - joins[c].begin());
        ex.color_entropy = entropy_bits(hist);
        ex.successful = retains_area(r.timelines[c].final_area, r.timelines[c].max_area);
        rows[s].push_back(ex);
      }
    }
  });
  for (auto& v : rows) {
    r.rows_per_snapshot.push_back(v.size());
    r.examples.insert(r.examples.end(), v.begin(), v.end());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Decision tree

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0;  // go left when value <= threshold
  std::array<std::size_t, 2> counts{0, 0};  // negatives, positives
  int left = -1, right = -1;
  std::size_t depth = 0;
  bool leaf() const { return feature < 0; }
  double positive_fraction() const {
    const auto n = counts[0] + counts[1];
    return n ? double(counts[1]) / double(n) : 0.0;
  }
};

struct TreeParams {
  std::size_t max_depth = 6;
  std::size_t min_leaf = 20;
  std::uint64_t seed = 0;
};

struct TreeModel {
  std::vector<TreeNode> nodes;
  TreeParams params;

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].leaf()) i = std::size_t(x[std::size_t(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
    return nodes[i];
  }
  double score(std::span<const double> x) const { return leaf_for(x).positive_fraction(); }
  bool predict(std::span<const double> x) const { return score(x) >= 0.5; }
  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }

  std::string dump(std::span<const char* const> names = kFeatureNames) const {
    std::ostringstream out;
    out.precision(17);
    out << "placelab-tree 1 max_depth=" << params.max_depth << " min_leaf=" << params.min_leaf
        << " nodes=" << nodes.size() << "\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      out << std::string(2 * n.depth, ' ') << "#" << i;
      if (n.leaf()) out << " leaf";
      else
        out << " if " << (std::size_t(n.feature) < names.size() ? names[std::size_t(n.feature)] : "f?") << " <= "
            << n.threshold << " then #" << n.left << " else #" << n.right;
      out << " neg=" << n.counts[0] << " pos=" << n.counts[1] << "\n";
    }
    return out.str();
  }
};

using FeatureRow = std::array<double, kFeatureCount>;

namespace detail {

inline double gini(std::size_t neg, std::size_t pos) {
  const double n = double(neg + pos);
  if (n == 0) return 0.0;
  const double a = double(neg) / n, b = double(pos) / n;
  return 1.0 - a * a - b * b;
}

inline int grow(TreeModel& m, std::span<const FeatureRow> x, std::span<const char> y, std::vector<std::size_t> idx,
                std::size_t depth) {
  TreeNode node;
  node.depth = depth;
  for (auto i : idx) ++node.counts[y[i] ? 1 : 0];
  const int id = int(m.nodes.size());
  m.nodes.push_back(node);
  const std::size_t n = idx.size();
  const double parent = gini(node.counts[0], node.counts[1]);
  if (depth >= m.params.max_depth || parent == 0 || n < 2 * m.params.min_leaf) return id;

  double best = parent;
  int best_feature = -1;
  double best_threshold = 0;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a][f] < x[b][f]; });
    std::size_t lneg = 0, lpos = 0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      (y[idx[k]] ? lpos : lneg) += 1;
      const double v = x[idx[k]][f], w = x[idx[k + 1]][f];
      if (v == w) continue;
      const std::size_t nl = k + 1, nr = n - nl;
      if (nl < m.params.min_leaf || nr < m.params.min_leaf) continue;
      const double imp = (double(nl) * gini(lneg, lpos) +
                          double(nr) * gini(node.counts[0] - lneg, node.counts[1] - lpos)) / double(n);
      if (imp < best - 1e-12) {
        best = imp;
        best_feature = int(f);
        best_threshold = v + (w - v) / 2;
      }
    }
  }
  if (best_feature < 0) return id;
  std::vector<std::size_t> left, right;
  for (auto i : idx) (x[i][std::size_t(best_feature)] <= best_threshold ? left : right).push_back(i);
  m.nodes[std::size_t(id)].feature = best_feature;
  m.nodes[std::size_t(id)].threshold = best_threshold;
  const int l = grow(m, x, y, std::move(left), depth + 1);
  const int r = grow(m, x, y, std::move(right), depth + 1);
  m.nodes[std::size_t(id)].left = l;
  m.nodes[std::size_t(id)].right = r;
  return id;
}

}  // namespace detail

/// CART with Gini impurity on the rows as given (no rebalancing). Candidate
/// thresholds are midpoints between consecutive distinct values; on equal
/// impurity the lower feature index, then the lower threshold, wins.
inline TreeModel fit_tree(std::span<const FeatureRow> x, std::span<const char> y, const TreeParams& params) {
  if (x.size() != y.size()) fail_argument("tree: features and labels differ in length");
  if (x.empty()) fail_argument("tree: no training rows");
  if (params.min_leaf == 0) fail_argument("tree: min_leaf must be positive");
  TreeModel m;
  m.params = params;
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  detail::grow(m, x, y, std::move(idx), 0);
  return m;
}

/// Indices kept after discarding majority-class rows at random until both
/// classes have the minority's size.
inline std::vector<std::size_t> balanced_indices(std::span<const char> y, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) fail_data("tree: training data has a single class");
  auto& major = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  std::mt19937_64 rng(mix_seed(seed, 0xd5));
  std::shuffle(major.begin(), major.end(), rng);
  major.resize(keep);
  std::vector<std::size_t> out(pos);
  out.insert(out.end(), neg.begin(), neg.end());
  std::sort(out.begin(), out.end());
  return out;
}

inline TreeModel train_tree(std::span<const SuccessExample> examples, const TreeParams& params) {
  std::vector<char> y(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) y[i] = examples[i].successful;
  const auto keep = balanced_indices(y, params.seed);
  std::vector<FeatureRow> bx;
  std::vector<char> by;
  for (auto i : keep) {
    bx.push_back(examples[i].features());
    by.push_back(y[i]);
  }
  return fit_tree(bx, by, params);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Trapezoidal area under the precision-recall curve, one point per distinct
/// score (descending), starting from recall 0 at the first point's precision.
inline double pr_auc(std::span<const double> scores, std::span<const char> labels) {
  if (scores.size() != labels.size()) fail_argument("pr_auc: length mismatch");
  std::size_t positives = 0;
  for (char l : labels) positives += l ? 1 : 0;
  if (positives == 0) fail_data("pr_auc: no positive examples");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double area = 0, prev_recall = 0, prev_precision = -1;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t e = k;
    while (e < order.size() && scores[order[e]] == scores[order[k]]) {
      (labels[order[e]] ? tp : fp) += 1;
      ++e;
    }
    const double precision = double(tp) / double(tp + fp);
    const double recall = double(tp) / double(positives);
    if (prev_precision < 0) prev_precision = precision;
    area += (recall - prev_recall) * (precision + prev_precision) / 2;
    prev_recall = recall;
    prev_precision = precision;
    k = e;
  }
  return area;
}

struct Evaluation {
  std::size_t examples = 0;
  double f1 = 0;
  double pr_auc = 0;
  double positive_fraction = 0;
};

inline Evaluation evaluate(const TreeModel& model, std::span<const SuccessExample> test) {
  if (test.empty()) fail_data("evaluate: empty test split");
  Evaluation ev;
  ev.examples = test.size();
  std::vector<double> scores;
  std::vector<char> labels;
  std::size_t tp = 0, fp = 0, fn = 0, pos = 0;
  for (const auto& ex : test) {
    const auto f = ex.features();
    const double s = model.score(f);
    scores.push_back(s);
    labels.push_back(ex.successful);
    const bool guess = s >= 0.5;
    pos += ex.successful;
    if (guess && ex.successful) ++tp;
    else if (guess) ++fp;
    else if (ex.successful) ++fn;
  }
  if (pos == 0) fail_data("evaluate: test split has no successful examples");
  ev.positive_fraction = double(pos) / double(test.size());
  ev.f1 = tp == 0 ? 0.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
  ev.pr_auc = pr_auc(scores, labels);
  return ev;
}

struct DatasetSplit {
  std::vector<SuccessExample> train, test;
};

/// 70/30 split by cluster, stratified on the cluster's success flag, so all
/// examples of one cluster land on the same side.
inline DatasetSplit split_by_cluster(std::span<const SuccessExample> examples, std::uint64_t seed,
                                     double train_fraction = 0.7) {
  std::map<Label, bool> cluster_success;
  for (const auto& ex : examples) cluster_success[ex.cluster] = ex.successful;
  std::array<std::vector<Label>, 2> by_class;
  for (const auto& [c, s] : cluster_success) by_class[s ? 1 : 0].push_back(c);
  std::mt19937_64 rng(mix_seed(seed, 0x70));
  std::set<Label> train;
  for (auto& group : by_class) {
    std::shuffle(group.begin(), group.end(), rng);
    const auto n = std::size_t(std::llround(train_fraction * double(group.size())));
    train.insert(group.begin(), group.begin() + long(n));
  }
  DatasetSplit s;
  for (const auto& ex : examples) (train.count(ex.cluster) ? s.train : s.test).push_back(ex);
  if (s.train.empty() || s.test.empty()) fail_data("split: too few clusters for a train/test split");
  return s;
}

/// Examples whose snapshot time lies in [from, to).
inline std::vector<SuccessExample> time_slice(std::span<const SuccessExample> examples, std::int64_t from,
                                              std::int64_t to) {
  std::vector<SuccessExample> out;
  for (const auto& ex : examples)
    if (ex.snapshot_time >= from && ex.snapshot_time < to) out.push_back(ex);
  return out;
}

}  // namespace placelab
