#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "placelab/core.hpp"
#include "placelab/embedding.hpp"
#include "placelab/ingest.hpp"

namespace placelab {

struct GraphEdge {
  std::uint32_t a = 0, b = 0;
  double w = 0;
};

/// Grid graph over the visible (touched) pixels of one snapshot.
struct PixelGraph {
  std::vector<ActionId> action;       // node -> visible action
  std::vector<std::uint32_t> pixel;   // node -> frame pixel
  std::vector<GraphEdge> edges;

  std::size_t node_count() const { return action.size(); }
};

/// Nodes in row-major order; edges join 4-adjacent visible pixels with the
/// Euclidean RGB distance as weight.
inline PixelGraph build_pixel_graph(const Canvas& canvas, const GameConfig& config) {
  PixelGraph g;
  const int w = canvas.width(), h = canvas.height();
  std::vector<std::uint32_t> node_of(canvas.top.size(), 0xffffffffu);
  for (std::size_t k = 0; k < canvas.top.size(); ++k) {
    if (canvas.top[k] == kNoAction) continue;
    node_of[k] = std::uint32_t(g.action.size());
    g.action.push_back(canvas.top[k]);
    g.pixel.push_back(canvas.frame_pixel(k));
  }
  const auto& rgb = config.rgb_table();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t k = std::size_t(y) * std::size_t(w) + std::size_t(x);
      if (node_of[k] == 0xffffffffu) continue;
      const Rgb c = rgb[canvas.color[k]];
      if (x + 1 < w && node_of[k + 1] != 0xffffffffu)
        g.edges.push_back({node_of[k], node_of[k + 1], rgb_distance(c, rgb[canvas.color[k + 1]])});
      if (y + 1 < h && node_of[k + std::size_t(w)] != 0xffffffffu)
        g.edges.push_back(
            {node_of[k], node_of[k + std::size_t(w)], rgb_distance(c, rgb[canvas.color[k + std::size_t(w)]])});
    }
  return g;
}

/// Felzenszwalb-Huttenlocher merging: edges in nondecreasing weight (edge
/// index breaks ties); two components join when the edge weight is within
/// both of Int(C) + kappa/|C|. Returns a dense label per node.
inline std::vector<Label> gbis_labels(const PixelGraph& g, double kappa) {
  if (!(kappa > 0)) fail_argument("gbis: kappa must be positive");
  std::vector<std::uint32_t> order(g.edges.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return g.edges[a].w != g.edges[b].w ? g.edges[a].w < g.edges[b].w : a < b;
  });
  DisjointSets sets(g.node_count());
  std::vector<double> threshold(g.node_count(), kappa);
  for (auto idx : order) {
    const GraphEdge& e = g.edges[idx];
    const auto ra = sets.find(e.a), rb = sets.find(e.b);
    if (ra == rb) continue;
    if (e.w <= threshold[ra] && e.w <= threshold[rb]) {
      const auto r = sets.unite(ra, rb);
      threshold[r] = e.w + kappa / double(sets.size_of(r));
    }
  }
  return sets.labels();
}

inline Partition gbis(const PixelGraph& g, double kappa) {
  Partition p;
  p.items.assign(g.action.begin(), g.action.end());
  p.labels = gbis_labels(g, kappa);
  return p;
}

// ---------------------------------------------------------------------------
// Ward agglomerative clustering

struct WardMerge {
  std::uint32_t a = 0, b = 0;  // merged cluster ids, a < b; new id is n + step
  double distance = 0;
  std::uint32_t size = 0;
};

struct WardResult {
  std::vector<WardMerge> merges;
  std::vector<Label> labels;  // per input row, dense in first-row order
};

using AdjacencyList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

namespace detail {

struct PairKey {
  double d2;
  std::uint32_t lo, hi;
  bool operator<(const PairKey& o) const {
    if (d2 != o.d2) return d2 < o.d2;
    if (lo != o.lo) return lo < o.lo;
    return hi < o.hi;
  }
};

inline std::vector<Label> labels_from_merges(std::size_t n, const std::vector<WardMerge>& merges) {
  DisjointSets sets(n + merges.size());
  for (std::size_t s = 0; s < merges.size(); ++s) {
    sets.unite(merges[s].a, std::uint32_t(n + s));
    sets.unite(merges[s].b, std::uint32_t(n + s));
  }
  std::vector<Label> roots(n);
  for (std::uint32_t i = 0; i < n; ++i) roots[i] = Label(sets.find(i));
  return densify_labels(roots);
}

/// Unconstrained Ward with a dense Lance-Williams distance matrix and cached
/// row minima.
inline WardResult ward_dense(const EmbeddingMatrix& v, double delta) {
  const std::size_t n = v.rows;
  WardResult res;
  if (n == 0) return res;
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0;
      auto a = v.row(i), b = v.row(j);
      for (std::size_t k = 0; k < v.dims; ++k) {
        const double t = double(a[k]) - b[k];
        s += t * t;
      }
      d2[i * n + j] = d2[j * n + i] = s;
    }
  std::vector<std::uint32_t> id(n);
  std::iota(id.begin(), id.end(), 0u);
  std::vector<std::uint32_t> size(n, 1);
  std::vector<char> alive(n, 1);
  std::vector<std::size_t> nn(n, n);
  auto key = [&](std::size_t i, std::size_t j) {
    return PairKey{d2[i * n + j], std::min(id[i], id[j]), std::max(id[i], id[j])};
  };
  auto refresh = [&](std::size_t i) {
    nn[i] = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !alive[j]) continue;
      if (nn[i] == n || key(i, j) < key(i, nn[i])) nn[i] = j;
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);
  const double delta2 = delta * delta;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i] || nn[i] == n) continue;
      if (best == n || key(i, nn[i]) < key(best, nn[best])) best = i;
    }
    if (best == n) break;
    const std::size_t i = best, j = nn[best];
    if (d2[i * n + j] > delta2) break;
    res.merges.push_back({std::min(id[i], id[j]), std::max(id[i], id[j]), std::sqrt(d2[i * n + j]),
                          size[i] + size[j]});
    // Lance-Williams for Ward on squared distances; the merged cluster keeps slot i.
    const double ni = size[i], nj = size[j], dij = d2[i * n + j];
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == i || k == j) continue;
      const double nk = size[k];
      const double nd = ((nk + ni) * d2[k * n + i] + (nk + nj) * d2[k * n + j] - nk * dij) / (nk + ni + nj);
      d2[k * n + i] = d2[i * n + k] = std::max(0.0, nd);
    }
    alive[j] = 0;
    size[i] += size[j];
    id[i] = std::uint32_t(n + step);
    refresh(i);
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == i) continue;
      if (nn[k] == i || nn[k] == j) refresh(k);
      else if (key(k, i) < key(k, nn[k])) nn[k] = i;
    }
  }
  res.labels = labels_from_merges(n, res.merges);
  return res;
}

/// Ward restricted to adjacent clusters. Distances come from centroids and
/// sizes, d^2 = 2 |A||B| / (|A|+|B|) * |mu_A - mu_B|^2, which equals the
/// Lance-Williams recurrence.
inline WardResult ward_sparse(const EmbeddingMatrix& v, const AdjacencyList& adjacency, double delta) {
  const std::size_t n = v.rows, h = v.dims;
  WardResult res;
  if (n == 0) return res;
  const std::size_t cap = 2 * n;
  std::vector<double> centroid(cap * h, 0.0);
  std::vector<std::uint32_t> size(cap, 0);
  std::vector<char> alive(cap, 0);
  std::vector<std::vector<std::uint32_t>> nbrs(cap);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = v.row(i);
    std::copy(r.begin(), r.end(), centroid.begin() + long(i * h));
    size[i] = 1;
    alive[i] = 1;
  }
  for (auto [a, b] : adjacency) {
    if (a == b) continue;
    if (a >= n || b >= n) fail_argument("ward_cluster: adjacency refers to a missing row");
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(nbrs[i].begin(), nbrs[i].end());
    nbrs[i].erase(std::unique(nbrs[i].begin(), nbrs[i].end()), nbrs[i].end());
  }
  auto dist2 = [&](std::uint32_t a, std::uint32_t b) {
    double s = 0;
    const double* ca = centroid.data() + std::size_t(a) * h;
    const double* cb = centroid.data() + std::size_t(b) * h;
    for (std::size_t k = 0; k < h; ++k) {
      const double t = ca[k] - cb[k];
      s += t * t;
    }
    return 2.0 * double(size[a]) * double(size[b]) / double(size[a] + size[b]) * s;
  };
  std::priority_queue<PairKey, std::vector<PairKey>, decltype([](const PairKey& x, const PairKey& y) { return y < x; })>
      heap;
  for (std::uint32_t a = 0; a < n; ++a)
    for (auto b : nbrs[a])
      if (a < b) heap.push({dist2(a, b), a, b});
  const double delta2 = delta * delta;
  std::uint32_t next = std::uint32_t(n);
  while (!heap.empty()) {
    const PairKey top = heap.top();
    heap.pop();
    if (!alive[top.lo] || !alive[top.hi]) continue;
    if (top.d2 > delta2) break;
    const std::uint32_t a = top.lo, b = top.hi, c = next++;
    res.merges.push_back({a, b, std::sqrt(top.d2), size[a] + size[b]});
    size[c] = size[a] + size[b];
    for (std::size_t k = 0; k < h; ++k)
      centroid[c * h + k] = (centroid[a * h + k] * size[a] + centroid[b * h + k] * size[b]) / size[c];
    alive[a] = alive[b] = 0;
    alive[c] = 1;
    std::vector<std::uint32_t> merged;
    std::set_union(nbrs[a].begin(), nbrs[a].end(), nbrs[b].begin(), nbrs[b].end(), std::back_inserter(merged));
    std::erase_if(merged, [&](std::uint32_t k) { return k == a || k == b || !alive[k]; });
    nbrs[a].clear();
    nbrs[b].clear();
    for (auto k : merged) {
      auto& row = nbrs[k];
      std::erase_if(row, [&](std::uint32_t x) { return x == a || x == b; });
      row.push_back(c);  // c is the largest live id, so rows stay sorted
      heap.push({dist2(k, c), k, c});
    }
    nbrs[c] = std::move(merged);
  }
  res.labels = labels_from_merges(n, res.merges);
  return res;
}

}  // namespace detail

/// Agglomerative Ward clustering of the rows of `vectors`. With an adjacency
/// list only adjacent clusters may merge; without one every pair is eligible.
/// Merging stops once the smallest eligible Ward distance exceeds `delta`
/// (distances are on the scale of Euclidean distance between single rows).
inline WardResult ward_cluster(const EmbeddingMatrix& vectors, const AdjacencyList* adjacency, double delta) {
  if (!(delta >= 0)) fail_argument("ward_cluster: delta must be non-negative");
  if (!vectors.finite()) fail_argument("ward_cluster: non-finite input vectors");
  if (adjacency == nullptr) return detail::ward_dense(vectors, delta);
  return detail::ward_sparse(vectors, *adjacency, delta);
}

// ---------------------------------------------------------------------------
// Snapshot segmentation

enum class SegmentMethod { gbis, n2v_ward, gbis_n2v_ward };

inline SegmentMethod parse_segment_method(std::string_view s) {
  if (s == "gbis") return SegmentMethod::gbis;
  if (s == "n2v-ward") return SegmentMethod::n2v_ward;
  if (s == "gbis-n2v-ward") return SegmentMethod::gbis_n2v_ward;
  fail_argument("unknown segmentation method '" + std::string(s) + "'");
}

struct SegmentParams {
  double kappa = 300.0;
  double delta = 1.0;
  SegmentMethod method = SegmentMethod::gbis_n2v_ward;
};

struct SnapshotSegmentation {
  Partition partition;               // items are the visible action ids
  std::vector<std::uint32_t> pixel;  // frame pixel of each item
  std::size_t background_pixels = 0; // untouched pixels, the reserved null cluster
  std::size_t super_actions = 0;
};

/// Segments the visible actions of one snapshot. GBIS groups pixels by color
/// into super-actions, each super-action takes the mean embedding of the
/// players behind its actions, and adjacency-constrained Ward merges
/// super-actions up to `delta`. Untouched pixels are not items.
inline SnapshotSegmentation segment_snapshot(const Canvas& canvas, const ActionLog& log,
                                             const EmbeddingMatrix& players, const SegmentParams& params) {
  const PixelGraph g = build_pixel_graph(canvas, log.config);
  SnapshotSegmentation out;
  out.background_pixels = canvas.top.size() - g.node_count();
  out.pixel = g.pixel;
  out.partition.items.assign(g.action.begin(), g.action.end());
  if (g.node_count() == 0) return out;
  if (params.method != SegmentMethod::gbis && players.rows < log.player_count())
    fail_argument("segment_snapshot: embeddings do not cover every player");

  std::vector<Label> super;
  if (params.method == SegmentMethod::n2v_ward) {
    super.resize(g.node_count());
    std::iota(super.begin(), super.end(), Label{0});
  } else {
    super = gbis_labels(g, params.kappa);
  }
  const std::size_t k = super.empty() ? 0 : std::size_t(*std::max_element(super.begin(), super.end())) + 1;
  out.super_actions = k;
  if (params.method == SegmentMethod::gbis) {
    out.partition.labels = std::move(super);
    return out;
  }

  EmbeddingMatrix mean(k, players.dims);
  std::vector<std::uint32_t> count(k, 0);
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    const auto c = std::size_t(super[v]);
    auto src = players.row(log.player[g.action[v]]);
    auto dst = mean.row(c);
    for (std::size_t d = 0; d < players.dims; ++d) dst[d] += src[d];
    ++count[c];
  }
  for (std::size_t c = 0; c < k; ++c)
    for (float& x : mean.row(c)) x /= float(count[c]);

  AdjacencyList adjacency;
  adjacency.reserve(g.edges.size());
  for (const auto& e : g.edges) {
    auto a = std::uint32_t(super[e.a]), b = std::uint32_t(super[e.b]);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    adjacency.emplace_back(a, b);
  }
  std::sort(adjacency.begin(), adjacency.end());
  adjacency.erase(std::unique(adjacency.begin(), adjacency.end()), adjacency.end());

  const WardResult ward = ward_cluster(mean, &adjacency, params.delta);
  out.partition.labels.resize(g.node_count());
  for (std::size_t v = 0; v < g.node_count(); ++v) out.partition.labels[v] = ward.labels[std::size_t(super[v])];
  out.partition.labels = densify_labels(out.partition.labels);
  return out;
}

}  // namespace placelab
