#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

namespace placelab {

using ActionId = std::uint32_t;
using PlayerId = std::uint32_t;
using ItemId = std::uint32_t;
using Label = std::int32_t;

inline constexpr ActionId kNoAction = 0xffffffffu;
inline constexpr Label kNullLabel = -1;

/// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind { invalid_argument, data, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_argument(const std::string& what) {
  throw Error(ErrorKind::invalid_argument, what);
}
[[noreturn]] inline void fail_data(const std::string& what) { throw Error(ErrorKind::data, what); }
[[noreturn]] inline void fail_io(const std::string& what) { throw Error(ErrorKind::io, what); }

struct Rgb {
  std::uint8_t r = 255, g = 255, b = 255;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline double rgb_distance(Rgb a, Rgb b) {
  const double dr = double(a.r) - double(b.r);
  const double dg = double(a.g) - double(b.g);
  const double db = double(a.b) - double(b.b);
  return std::sqrt(dr * dr + dg * dg + db * db);
}

/// Assignment of items (pixels or actions) to cluster labels. Items carrying
/// kNullLabel are unlabeled and get masked by the evaluation metrics.
struct Partition {
  std::vector<ItemId> items;
  std::vector<Label> labels;

  std::size_t size() const { return items.size(); }

  std::size_t cluster_count() const {
    std::vector<Label> l;
    l.reserve(labels.size());
    for (Label v : labels)
      if (v != kNullLabel) l.push_back(v);
    std::sort(l.begin(), l.end());
    return std::size_t(std::unique(l.begin(), l.end()) - l.begin());
  }

  /// Builds a partition over items 0..n-1 from a dense label vector.
  static Partition from_labels(std::vector<Label> labels) {
    Partition p;
    p.items.resize(labels.size());
    std::iota(p.items.begin(), p.items.end(), ItemId{0});
    p.labels = std::move(labels);
    return p;
  }
};

/// Relabels arbitrary labels to 0..k-1 in order of first appearance; null stays null.
inline std::vector<Label> densify_labels(const std::vector<Label>& labels) {
  std::unordered_map<Label, Label> remap;
  std::vector<Label> out(labels.size(), kNullLabel);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNullLabel) continue;
    auto [it, inserted] = remap.try_emplace(labels[i], Label(remap.size()));
    out[i] = it->second;
  }
  return out;
}

/// Union-find with union by size and path halving.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n = 0) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Returns the surviving root.
  std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }

  std::uint32_t size_of(std::uint32_t x) { return size_[find(x)]; }
  std::size_t element_count() const { return parent_.size(); }

  /// Dense component labels numbered by first element.
  std::vector<Label> labels() {
    std::vector<Label> root_label(parent_.size(), kNullLabel);
    std::vector<Label> out(parent_.size());
    Label next = 0;
    for (std::uint32_t i = 0; i < parent_.size(); ++i) {
      const std::uint32_t r = find(i);
      if (root_label[r] == kNullLabel) root_label[r] = next++;
      out[i] = root_label[r];
    }
    return out;
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
};

/// Runs body(i) for i in [0, n) on up to `workers` threads. Work is handed out
/// in index order through an atomic counter, so results must be written to
/// per-index slots for determinism.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::jthread> pool;
  const unsigned count = std::min<std::size_t>(workers, n);
  pool.reserve(count);
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(run);
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

/// Stable 64-bit FNV-1a; used for opaque player ids and config hashes.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Derives an independent generator seed from a base seed and a stream tag.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace placelab
