#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "placelab/core.hpp"
#include "placelab/ingest.hpp"
#include "placelab/io.hpp"

namespace placelab {

/// Weighted undirected player graph in CSR form. Weights count same-color
/// co-placements by two distinct players on one pixel or 4-adjacent pixels.
struct PlayerGraph {
  std::size_t node_count = 0;
  std::vector<std::uint64_t> offsets{0};
  std::vector<PlayerId> neighbors;  // sorted within each row
  std::vector<std::uint32_t> weights;

  std::span<const PlayerId> adjacent(PlayerId u) const {
    return {neighbors.data() + offsets[u], neighbors.data() + offsets[u + 1]};
  }
  std::span<const std::uint32_t> adjacent_weights(PlayerId u) const {
    return {weights.data() + offsets[u], weights.data() + offsets[u + 1]};
  }
  std::size_t degree(PlayerId u) const { return std::size_t(offsets[u + 1] - offsets[u]); }
  std::size_t edge_count() const { return neighbors.size() / 2; }

  std::uint32_t weight(PlayerId u, PlayerId v) const {
    auto row = adjacent(u);
    auto it = std::lower_bound(row.begin(), row.end(), v);
    if (it == row.end() || *it != v) return 0;
    return adjacent_weights(u)[std::size_t(it - row.begin())];
  }

  static PlayerGraph from_edges(std::size_t n, const std::unordered_map<std::uint64_t, std::uint32_t>& edges) {
    PlayerGraph g;
    g.node_count = n;
    std::vector<std::uint64_t> deg(n + 1, 0);
    for (const auto& [key, w] : edges) {
      ++deg[key >> 32];
      ++deg[key & 0xffffffffu];
    }
    g.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + deg[i];
    g.neighbors.resize(g.offsets[n]);
    g.weights.resize(g.offsets[n]);
    std::vector<std::uint64_t> fill(g.offsets.begin(), g.offsets.end() - 1);
    for (const auto& [key, w] : edges) {
      const auto a = PlayerId(key >> 32), b = PlayerId(key & 0xffffffffu);
      g.neighbors[fill[a]] = b;
      g.weights[fill[a]++] = w;
      g.neighbors[fill[b]] = a;
      g.weights[fill[b]++] = w;
    }
    for (std::size_t u = 0; u < n; ++u) {
      const auto lo = g.offsets[u], hi = g.offsets[u + 1];
      std::vector<std::pair<PlayerId, std::uint32_t>> row;
      row.reserve(hi - lo);
      for (auto k = lo; k < hi; ++k) row.emplace_back(g.neighbors[k], g.weights[k]);
      std::sort(row.begin(), row.end());
      for (auto k = lo; k < hi; ++k) {
        g.neighbors[k] = row[k - lo].first;
        g.weights[k] = row[k - lo].second;
      }
    }
    return g;
  }
};

inline PlayerGraph build_player_graph(const ActionLog& log) {
  const std::size_t n = log.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto key = [&](std::uint32_t i) { return (std::uint64_t(log.pixel(i)) << 8) | log.color[i]; };
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    const auto ka = key(a), kb = key(b);
    return ka != kb ? ka < kb : a < b;
  });
  // Group ranges keyed by (pixel, color).
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> groups;
  for (std::uint32_t s = 0; s < n;) {
    std::uint32_t e = s;
    const auto k = key(order[s]);
    while (e < n && key(order[e]) == k) ++e;
    groups.emplace(k, std::make_pair(s, e));
    s = e;
  }
  std::unordered_map<std::uint64_t, std::uint32_t> edges;
  auto bump = [&](PlayerId a, PlayerId b) {
    if (a == b) return;
    if (a > b) std::swap(a, b);
    ++edges[(std::uint64_t(a) << 32) | b];
  };
  const std::uint32_t w = std::uint32_t(log.width());
  const std::uint32_t h = std::uint32_t(log.height());
  for (const auto& [k, range] : groups) {
    const auto [s, e] = range;
    for (auto i = s; i < e; ++i)
      for (auto j = i + 1; j < e; ++j) bump(log.player[order[i]], log.player[order[j]]);
    const std::uint32_t pixel = std::uint32_t(k >> 8);
    const std::uint64_t color = k & 0xff;
    const std::uint32_t px = pixel % w, py = pixel / w;
    std::uint32_t nbrs[2];
    int count = 0;
    if (px + 1 < w) nbrs[count++] = pixel + 1;
    if (py + 1 < h) nbrs[count++] = pixel + w;
    for (int q = 0; q < count; ++q) {
      auto it = groups.find((std::uint64_t(nbrs[q]) << 8) | color);
      if (it == groups.end()) continue;
      const auto [s2, e2] = it->second;
      for (auto i = s; i < e; ++i)
        for (auto j = s2; j < e2; ++j) bump(log.player[order[i]], log.player[order[j]]);
    }
  }
  return PlayerGraph::from_edges(log.player_count(), edges);
}

struct EmbeddingMatrix {
  std::size_t rows = 0, dims = 0;
  std::vector<float> data;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t d) : rows(r), dims(d), data(r * d, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * dims, dims}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dims, dims}; }

  double norm(std::size_t i) const {
    double s = 0;
    for (float v : row(i)) s += double(v) * v;
    return std::sqrt(s);
  }
  bool finite() const {
    return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
  }
};

/// Unit-normalizes each row; zero rows stay zero.
inline EmbeddingMatrix normalize_rows(EmbeddingMatrix m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double n = m.norm(i);
    if (n > 0)
      for (float& v : m.row(i)) v = float(v / n);
  }
  return m;
}

/// Subtracts the mean of the non-zero rows from each of them. Skip-gram
/// vectors share a large common direction that otherwise dominates cosines.
inline EmbeddingMatrix center_rows(EmbeddingMatrix m) {
  std::vector<double> mean(m.dims, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (m.norm(i) == 0) continue;
    ++count;
    auto r = m.row(i);
    for (std::size_t d = 0; d < m.dims; ++d) mean[d] += r[d];
  }
  if (count == 0) return m;
  for (double& v : mean) v /= double(count);
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (m.norm(i) == 0) continue;
    auto r = m.row(i);
    for (std::size_t d = 0; d < m.dims; ++d) r[d] = float(r[d] - mean[d]);
  }
  return m;
}

inline double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += double(a[k]) * b[k];
    na += double(a[k]) * a[k];
    nb += double(b[k]) * b[k];
  }
  if (na == 0 || nb == 0) return 0;
  return dot / std::sqrt(na * nb);
}

struct Node2VecParams {
  int dims = 64;
  double p = 1.0;  // return
  double q = 1.0;  // in-out
  int walk_length = 40;
  int walks_per_node = 10;
  int window = 5;
  int negative = 5;
  int epochs = 3;
  double learning_rate = 0.025;
  double norm_cap = 100.0;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

namespace detail {

/// Walker alias table over non-negative weights.
class AliasTable {
 public:
  AliasTable() = default;
  template <class W>
  explicit AliasTable(std::span<const W> weights) {
    const std::size_t n = weights.size();
    prob_.resize(n);
    alias_.resize(n);
    double total = 0;
    for (auto w : weights) total += double(w);
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = double(weights[i]) * double(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(std::uint32_t(i));
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back(), l = large.back();
      small.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = scaled[l] + scaled[s] - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (auto i : large) prob_[i] = 1.0;
    for (auto i : small) prob_[i] = 1.0;
  }

  template <class Rng>
  std::uint32_t sample(Rng& rng) const {
    std::uniform_int_distribution<std::uint32_t> pick(0, std::uint32_t(prob_.size() - 1));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const auto i = pick(rng);
    return coin(rng) < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

inline bool has_neighbor(const PlayerGraph& g, PlayerId u, PlayerId v) {
  auto row = g.adjacent(u);
  return std::binary_search(row.begin(), row.end(), v);
}

}  // namespace detail

/// Second-order biased random walks. Uses rejection sampling against the
/// first-order weighted distribution, which is exact for any p, q.
inline std::vector<std::vector<PlayerId>> generate_walks(const PlayerGraph& g, const Node2VecParams& params) {
  std::vector<detail::AliasTable> alias(g.node_count);
  for (PlayerId u = 0; u < g.node_count; ++u)
    if (g.degree(u) > 0) alias[u] = detail::AliasTable(g.adjacent_weights(u));
  const double bias_return = 1.0 / params.p, bias_out = 1.0 / params.q;
  const double bias_max = std::max({bias_return, 1.0, bias_out});
  const std::size_t per_node = std::size_t(params.walks_per_node);
  std::vector<std::vector<PlayerId>> walks(g.node_count * per_node);
  parallel_for(g.node_count, params.workers, [&](std::size_t start) {
    if (g.degree(PlayerId(start)) == 0) return;
    for (std::size_t r = 0; r < per_node; ++r) {
      std::mt19937_64 rng(mix_seed(params.seed, start * per_node + r));
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      auto& walk = walks[r * g.node_count + start];
      walk.reserve(std::size_t(params.walk_length));
      walk.push_back(PlayerId(start));
      while (walk.size() < std::size_t(params.walk_length)) {
        const PlayerId cur = walk.back();
        const auto nbrs = g.adjacent(cur);
        if (walk.size() == 1) {
          walk.push_back(nbrs[alias[cur].sample(rng)]);
          continue;
        }
        const PlayerId prev = walk[walk.size() - 2];
        for (;;) {
          const PlayerId cand = nbrs[alias[cur].sample(rng)];
          double bias;
          if (cand == prev) bias = bias_return;
          else if (detail::has_neighbor(g, prev, cand)) bias = 1.0;
          else bias = bias_out;
          if (bias >= bias_max || coin(rng) * bias_max < bias) {
            walk.push_back(cand);
            break;
          }
        }
      }
    }
  });
  std::erase_if(walks, [](const auto& w) { return w.empty(); });
  return walks;
}

/// Node2Vec: biased walks fed to skip-gram with negative sampling. Training is
/// single-threaded so a seed fixes the result. Isolated players keep the zero
/// vector; rows above `norm_cap` are rescaled onto it.
inline EmbeddingMatrix embed_players(const PlayerGraph& g, const Node2VecParams& params) {
  if (params.dims < 2) fail_argument("embed_players: need at least 2 dimensions");
  if (params.p <= 0 || params.q <= 0) fail_argument("embed_players: p and q must be positive");
  if (params.window < 1 || params.walk_length < 2 || params.walks_per_node < 1 || params.epochs < 1)
    fail_argument("embed_players: bad walk parameters");
  const std::size_t n = g.node_count, h = std::size_t(params.dims);
  EmbeddingMatrix in(n, h);
  if (g.edge_count() == 0) return in;
  const auto walks = generate_walks(g, params);

  std::vector<double> freq(n, 0);
  std::size_t tokens = 0;
  for (const auto& w : walks) {
    for (PlayerId v : w) freq[v] += 1;
    tokens += w.size();
  }
  for (double& f : freq) f = std::pow(f, 0.75);
  const detail::AliasTable noise{std::span<const double>(freq)};

  std::mt19937_64 rng(mix_seed(params.seed, 0xe3bedd1ull));
  std::uniform_real_distribution<float> init(-0.5f / float(h), 0.5f / float(h));
  for (PlayerId u = 0; u < n; ++u)
    if (g.degree(u) > 0)
      for (float& v : in.row(u)) v = init(rng);
  EmbeddingMatrix out(n, h);
  std::vector<float> grad(h);
  std::uniform_int_distribution<int> shrink(0, params.window - 1);

  const double total = double(tokens) * params.epochs + 1;
  std::size_t processed = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (const auto& walk : walks) {
      for (std::size_t i = 0; i < walk.size(); ++i, ++processed) {
        const double alpha = std::max(params.learning_rate * 1e-4, params.learning_rate * (1.0 - processed / total));
        const int b = shrink(rng);
        const long lo = std::max<long>(0, long(i) - (params.window - b));
        const long hi = std::min<long>(long(walk.size()) - 1, long(i) + (params.window - b));
        const PlayerId center = walk[i];
        for (long j = lo; j <= hi; ++j) {
          if (std::size_t(j) == i) continue;
          auto ctx = in.row(walk[std::size_t(j)]);
          std::fill(grad.begin(), grad.end(), 0.0f);
          for (int d = 0; d <= params.negative; ++d) {
            PlayerId target;
            float label;
            if (d == 0) {
              target = center;
              label = 1.0f;
            } else {
              target = PlayerId(noise.sample(rng));
              if (target == center) continue;
              label = 0.0f;
            }
            auto t = out.row(target);
            double f = 0;
            for (std::size_t k = 0; k < h; ++k) f += double(ctx[k]) * t[k];
            double sig;
            if (f > 6) sig = 1.0;
            else if (f < -6) sig = 0.0;
            else sig = 1.0 / (1.0 + std::exp(-f));
            const float gstep = float((label - sig) * alpha);
            for (std::size_t k = 0; k < h; ++k) {
              grad[k] += gstep * t[k];
              t[k] += gstep * ctx[k];
            }
          }
          for (std::size_t k = 0; k < h; ++k) ctx[k] += grad[k];
        }
      }
    }
  }
  for (std::size_t u = 0; u < n; ++u) {
    const double norm = in.norm(u);
    if (!std::isfinite(norm)) fail_data("embed_players: training diverged");
    if (norm > params.norm_cap)
      for (float& v : in.row(u)) v = float(v * (params.norm_cap / norm));
  }
  return in;
}

// File layout: one text header line, then rows*dims little-endian float32.
inline void write_embedding(const std::filesystem::path& path, const EmbeddingMatrix& m, const Node2VecParams& params) {
  io::write_atomic(
      path,
      [&](std::ostream& o) {
        o << "placelab-embedding 1 rows=" << m.rows << " dims=" << m.dims << " seed=" << params.seed
          << " p=" << params.p << " q=" << params.q << " walk_length=" << params.walk_length
          << " walks_per_node=" << params.walks_per_node << " window=" << params.window
          << " negative=" << params.negative << " epochs=" << params.epochs << '\n';
        o.write(reinterpret_cast<const char*>(m.data.data()), std::streamsize(m.data.size() * sizeof(float)));
      },
      true);
}

inline EmbeddingMatrix read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, field;
  int version = 0;
  hs >> magic >> version;
  if (magic != "placelab-embedding" || version != 1) fail_data(path.string() + ": not an embedding file");
  std::size_t rows = 0, dims = 0;
  while (hs >> field) {
    if (field.rfind("rows=", 0) == 0) rows = std::stoull(field.substr(5));
    if (field.rfind("dims=", 0) == 0) dims = std::stoull(field.substr(5));
  }
  EmbeddingMatrix m(rows, dims);
  in.read(reinterpret_cast<char*>(m.data.data()), std::streamsize(m.data.size() * sizeof(float)));
  if (std::size_t(in.gcount()) != m.data.size() * sizeof(float)) fail_data(path.string() + ": truncated embedding");
  return m;
}

}  // namespace placelab
