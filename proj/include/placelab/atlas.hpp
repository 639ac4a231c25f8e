#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "placelab/core.hpp"
#include "placelab/ingest.hpp"
#include "placelab/io.hpp"

namespace placelab {

struct Point {
  double x = 0, y = 0;
};

struct BBox {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  bool contains(Point p) const { return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y; }
};

inline BBox bounding_box(std::span<const Point> poly) {
  BBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Point& p : poly) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

/// Absolute shoelace area.
inline double polygon_area(std::span<const Point> poly) {
  double twice = 0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    twice += (poly[j].x * poly[i].y) - (poly[i].x * poly[j].y);
  return std::abs(twice) / 2;
}

namespace detail {
inline bool on_segment(Point p, Point a, Point b) {
  const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  const double scale = std::max({1.0, std::abs(b.x - a.x) + std::abs(b.y - a.y)});
  if (std::abs(cross) > 1e-12 * scale * scale) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
         p.y <= std::max(a.y, b.y);
}

inline bool collinear(std::span<const Point> poly) {
  return polygon_area(poly) == 0.0;
}
}  // namespace detail

/// Even-odd ray casting along +x with half-open edges, so a vertex on the ray
/// is counted once. Points on the boundary are inside; a polygon with zero
/// area contains only its boundary.
inline bool point_in_polygon(Point p, std::span<const Point> poly) {
  if (poly.size() < 3) fail_argument("point_in_polygon: polygon needs at least 3 vertices");
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    if (detail::on_segment(p, poly[j], poly[i])) return true;
  if (detail::collinear(poly)) return false;
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

struct AtlasEntry {
  std::string id;
  std::string name;
  std::optional<std::string> subreddit;
  std::vector<Point> polygon;
  BBox bbox;

  double area() const { return polygon_area(polygon); }
};

/// Numeric ids compare numerically, anything else lexicographically.
inline bool id_less(const std::string& a, const std::string& b) {
  long long x, y;
  const bool na = io::parse_number(a, x), nb = io::parse_number(b, y);
  if (na && nb) return x < y;
  if (na != nb) return na;
  return a < b;
}

inline AtlasEntry make_entry(std::string id, std::string name, std::optional<std::string> subreddit,
                             std::vector<Point> polygon) {
  if (polygon.size() < 3) fail_data("atlas entry " + id + ": polygon needs at least 3 vertices");
  AtlasEntry e{std::move(id), std::move(name), std::move(subreddit), std::move(polygon), {}};
  e.bbox = bounding_box(e.polygon);
  return e;
}

namespace detail {

/// "/r/Foo, r/bar" -> "foo"; empty -> nullopt.
inline std::optional<std::string> normalize_subreddit(std::string s) {
  if (auto comma = s.find_first_of(",; "); comma != std::string::npos) {
    std::string first = s.substr(0, comma);
    if (io::trim(first).empty()) {
      auto rest = s.substr(comma + 1);
      return normalize_subreddit(std::string(io::trim(rest)));
    }
    s = first;
  }
  std::string_view v = io::trim(s);
  for (std::string_view prefix : {"https://www.reddit.com", "https://reddit.com", "/", "r/"}) {
    if (v.substr(0, prefix.size()) == prefix) v.remove_prefix(prefix.size());
  }
  if (v.substr(0, 2) == "r/") v.remove_prefix(2);
  while (!v.empty() && v.back() == '/') v.remove_suffix(1);
  if (v.empty()) return std::nullopt;
  std::string out(v);
  for (char& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Period keys look like "1-166" or "167-258, T"; "T" sorts last.
inline double period_end(const std::string& key) {
  if (key.find('T') != std::string::npos) return std::numeric_limits<double>::infinity();
  std::vector<long> nums;
  extract_integers(key, nums);
  double best = -std::numeric_limits<double>::infinity();
  for (long n : nums) best = std::max(best, double(std::abs(n)));
  return best;
}

inline std::vector<Point> read_path(const nlohmann::json& path) {
  std::vector<Point> pts;
  for (const auto& v : path) pts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  return pts;
}

}  // namespace detail

/// Reads an atlas JSON array. Accepts the internal schema and the community
/// files: `path` may be a vertex list or an object of time-scoped vertex
/// lists (the latest period wins); the subreddit comes from `subreddit` or
/// `links.subreddit`. `offset` shifts vertices into the log's frame.
inline std::vector<AtlasEntry> atlas_from_json(const nlohmann::json& j, int offset_x = 0, int offset_y = 0) {
  std::vector<AtlasEntry> out;
  const nlohmann::json& arr = j.is_object() && j.contains("entries") ? j["entries"] : j;
  if (!arr.is_array()) fail_data("atlas: expected an array of entries");
  for (const auto& e : arr) {
    try {
      std::string id = e.at("id").is_string() ? e["id"].get<std::string>() : e["id"].dump();
      std::string name = e.value("name", std::string{});
      std::optional<std::string> sub;
      if (e.contains("subreddit") && e["subreddit"].is_string())
        sub = detail::normalize_subreddit(e["subreddit"].get<std::string>());
      else if (e.contains("links") && e["links"].contains("subreddit") && !e["links"]["subreddit"].empty())
        sub = detail::normalize_subreddit(e["links"]["subreddit"].at(0).get<std::string>());
      const auto& path = e.at("path");
      std::vector<Point> poly;
      if (path.is_array()) {
        poly = detail::read_path(path);
      } else {
        std::string best_key;
        double best = -std::numeric_limits<double>::infinity();
        for (auto it = path.begin(); it != path.end(); ++it) {
          const double end = detail::period_end(it.key());
          if (best_key.empty() || end > best) {
            best = end;
            best_key = it.key();
          }
        }
        if (best_key.empty()) continue;
        poly = detail::read_path(path.at(best_key));
      }
      for (auto& p : poly) {
        p.x += offset_x;
        p.y += offset_y;
      }
      if (poly.size() < 3) continue;
      out.push_back(make_entry(std::move(id), std::move(name), std::move(sub), std::move(poly)));
    } catch (const nlohmann::json::exception& ex) {
      fail_data(std::string("atlas entry: ") + ex.what());
    }
  }
  return out;
}

inline std::vector<AtlasEntry> load_atlas(const std::filesystem::path& path, int offset_x = 0, int offset_y = 0) {
  try {
    return atlas_from_json(nlohmann::json::parse(io::read_text(path)), offset_x, offset_y);
  } catch (const nlohmann::json::parse_error& e) {
    fail_data(path.string() + ": " + e.what());
  }
}

inline nlohmann::json atlas_to_json(std::span<const AtlasEntry> atlas) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : atlas) {
    nlohmann::json path = nlohmann::json::array();
    for (const auto& p : e.polygon) path.push_back({p.x, p.y});
    arr.push_back({{"id", e.id}, {"name", e.name}, {"subreddit", e.subreddit.value_or("")}, {"path", path}});
  }
  return arr;
}

/// Per-pixel artwork label over a canvas region.
struct LabeledCanvas {
  Expansion region;
  int frame_width = 0;
  std::vector<std::string> ids;     // sorted atlas ids; labels index into this
  std::vector<Label> label;         // region-local row-major

  Label at(int x, int y) const {
    if (!region.contains(x, y)) return kNullLabel;
    return label[std::size_t(y - region.y0) * std::size_t(region.width) + std::size_t(x - region.x0)];
  }
  std::size_t distinct_labels() const {
    std::vector<char> seen(ids.size(), 0);
    std::size_t n = 0;
    for (Label l : label)
      if (l != kNullLabel && !seen[std::size_t(l)]) {
        seen[std::size_t(l)] = 1;
        ++n;
      }
    return n;
  }
  /// Pixel count per label.
  std::vector<std::size_t> areas() const {
    std::vector<std::size_t> a(ids.size(), 0);
    for (Label l : label)
      if (l != kNullLabel) ++a[std::size_t(l)];
    return a;
  }
};

/// Labels each pixel (integer coordinates) with the smallest-area containing
/// polygon; equal areas go to the lower id. Pixels are only tested against
/// entries whose bounding box holds them. Row bands run in parallel.
inline LabeledCanvas label_canvas(const Expansion& region, int frame_width, std::span<const AtlasEntry> atlas,
                                  unsigned workers = 1) {
  LabeledCanvas out;
  out.region = region;
  out.frame_width = frame_width;
  const std::size_t n = atlas.size();
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](auto a, auto b) { return id_less(atlas[a].id, atlas[b].id); });
  std::vector<Label> id_rank(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.ids.push_back(atlas[by_id[k]].id);
    id_rank[by_id[k]] = Label(k);
  }
  std::vector<double> area(n);
  for (std::size_t i = 0; i < n; ++i) area[i] = atlas[i].area();
  // Priority: smaller area first, then lower id rank.
  auto better = [&](std::size_t a, std::size_t b) {
    if (area[a] != area[b]) return area[a] < area[b];
    return id_rank[a] < id_rank[b];
  };

  out.label.assign(std::size_t(region.width) * std::size_t(region.height), kNullLabel);
  std::vector<std::int32_t> owner(out.label.size(), -1);
  constexpr int kBand = 32;
  const int bands = (region.height + kBand - 1) / kBand;
  parallel_for(std::size_t(bands), workers, [&](std::size_t band) {
    const int y_lo = region.y0 + int(band) * kBand;
    const int y_hi = std::min(region.y0 + region.height, y_lo + kBand);
    for (std::size_t e = 0; e < n; ++e) {
      const BBox& b = atlas[e].bbox;
      const int ey0 = std::max(y_lo, int(std::ceil(b.min_y)));
      const int ey1 = std::min(y_hi - 1, int(std::floor(b.max_y)));
      const int ex0 = std::max(region.x0, int(std::ceil(b.min_x)));
      const int ex1 = std::min(region.x0 + region.width - 1, int(std::floor(b.max_x)));
      for (int y = ey0; y <= ey1; ++y)
        for (int x = ex0; x <= ex1; ++x) {
          const std::size_t k = std::size_t(y - region.y0) * std::size_t(region.width) + std::size_t(x - region.x0);
          if (owner[k] >= 0 && !better(e, std::size_t(owner[k]))) continue;
          if (point_in_polygon({double(x), double(y)}, atlas[e].polygon)) owner[k] = std::int32_t(e);
        }
    }
  });
  for (std::size_t k = 0; k < owner.size(); ++k)
    if (owner[k] >= 0) out.label[k] = id_rank[std::size_t(owner[k])];
  return out;
}

inline LabeledCanvas label_canvas(const Canvas& canvas, std::span<const AtlasEntry> atlas, unsigned workers = 1) {
  return label_canvas(canvas.region, canvas.frame_width, atlas, workers);
}

/// Each action inherits the label of its pixel.
inline std::vector<Label> label_actions(const ActionLog& log, const LabeledCanvas& labeled) {
  std::vector<Label> out(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) out[i] = labeled.at(log.x[i], log.y[i]);
  return out;
}

}  // namespace placelab
