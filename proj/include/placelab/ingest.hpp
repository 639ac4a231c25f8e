#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "placelab/core.hpp"
#include "placelab/io.hpp"

namespace placelab {

inline constexpr std::int64_t kMsPerHour = 3'600'000;
inline constexpr int kCacheVersion = 1;

enum class Edition { y2017, y2022, y2023, synthetic };

inline std::string to_string(Edition e) {
  switch (e) {
    case Edition::y2017: return "2017";
    case Edition::y2022: return "2022";
    case Edition::y2023: return "2023";
    case Edition::synthetic: return "synthetic";
  }
  return "?";
}

inline Edition parse_edition(std::string_view s) {
  if (s == "2017") return Edition::y2017;
  if (s == "2022") return Edition::y2022;
  if (s == "2023") return Edition::y2023;
  if (s == "synthetic") return Edition::synthetic;
  fail_argument("unknown edition '" + std::string(s) + "'");
}

/// Canvas extent active from `time_ms` on. The origin places the region inside
/// the edition's full coordinate frame (2023 grew around its center).
struct Expansion {
  std::int64_t time_ms = 0;
  int width = 0, height = 0;
  int x0 = 0, y0 = 0;

  bool contains(int x, int y) const { return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height; }
  std::int64_t area() const { return std::int64_t(width) * height; }
};

/// Colors available from `time_ms` on. Later palettes extend earlier ones, so a
/// palette index means the same RGB for the whole edition.
struct Palette {
  std::int64_t time_ms = 0;
  std::vector<Rgb> colors;
};

inline Rgb parse_hex_color(std::string_view s) {
  s = io::trim(s);
  if (!s.empty() && s.front() == '#') s.remove_prefix(1);
  unsigned v = 0;
  if (s.size() != 6 || std::from_chars(s.data(), s.data() + 6, v, 16).ptr != s.data() + 6)
    fail_data("bad hex color '" + std::string(s) + "'");
  return Rgb{std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
}

inline std::string to_hex(Rgb c) {
  static constexpr char digits[] = "0123456789ABCDEF";
  std::string s = "#";
  for (std::uint8_t v : {c.r, c.g, c.b}) {
    s += digits[v >> 4];
    s += digits[v & 15];
  }
  return s;
}

struct GameConfig {
  Edition edition = Edition::synthetic;
  std::vector<Expansion> expansions;
  std::vector<Palette> palettes;
  std::optional<std::int64_t> whiteout_start_ms;
  /// 0 means "derive from the data span" when parsing a dump.
  std::int64_t duration_ms = 0;
  /// Added to raw dump coordinates to land in the full frame.
  int coord_offset_x = 0, coord_offset_y = 0;
  std::uint8_t background_color = 0;
  std::string note;

  int full_width() const {
    int w = 0;
    for (const auto& e : expansions) w = std::max(w, e.x0 + e.width);
    return w;
  }
  int full_height() const {
    int h = 0;
    for (const auto& e : expansions) h = std::max(h, e.y0 + e.height);
    return h;
  }
  std::size_t full_area() const { return std::size_t(full_width()) * std::size_t(full_height()); }

  const Expansion& expansion_at(std::int64_t t) const {
    auto it = std::upper_bound(expansions.begin(), expansions.end(), t,
                               [](std::int64_t v, const Expansion& e) { return v < e.time_ms; });
    return it == expansions.begin() ? expansions.front() : *std::prev(it);
  }
  const Palette& palette_at(std::int64_t t) const {
    auto it = std::upper_bound(palettes.begin(), palettes.end(), t,
                               [](std::int64_t v, const Palette& p) { return v < p.time_ms; });
    return it == palettes.begin() ? palettes.front() : *std::prev(it);
  }
  const std::vector<Rgb>& rgb_table() const { return palettes.back().colors; }
  Rgb rgb(std::uint8_t color) const { return rgb_table().at(color); }

  std::optional<std::uint8_t> color_index(Rgb c) const {
    const auto& t = rgb_table();
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] == c) return std::uint8_t(i);
    return std::nullopt;
  }

  /// Time from which analyses stop: whiteout start, or the duration.
  std::int64_t analysis_end() const { return whiteout_start_ms.value_or(duration_ms); }

  void validate() const {
    if (expansions.empty()) fail_argument("config: no canvas expansions");
    if (expansions.front().time_ms != 0) fail_argument("config: first expansion must start at time 0");
    for (std::size_t i = 1; i < expansions.size(); ++i) {
      if (expansions[i].time_ms <= expansions[i - 1].time_ms)
        fail_argument("config: expansions must be strictly increasing in time");
      if (expansions[i].area() < expansions[i - 1].area())
        fail_argument("config: expansions must not shrink the canvas");
    }
    for (const auto& e : expansions)
      if (e.width <= 0 || e.height <= 0 || e.x0 < 0 || e.y0 < 0) fail_argument("config: bad expansion extent");
    if (full_width() > 65535 || full_height() > 65535) fail_argument("config: canvas too large");
    if (palettes.empty()) fail_argument("config: no palettes");
    if (palettes.front().time_ms != 0) fail_argument("config: first palette must start at time 0");
    for (std::size_t i = 1; i < palettes.size(); ++i) {
      const auto& prev = palettes[i - 1].colors;
      const auto& cur = palettes[i].colors;
      if (palettes[i].time_ms <= palettes[i - 1].time_ms) fail_argument("config: palettes out of order");
      if (cur.size() < prev.size() || !std::equal(prev.begin(), prev.end(), cur.begin()))
        fail_argument("config: each palette must extend the previous one");
    }
    if (rgb_table().size() > 255) fail_argument("config: palette too large");
    if (background_color >= palettes.front().colors.size()) fail_argument("config: bad background color");
    if (whiteout_start_ms && duration_ms > 0 && *whiteout_start_ms > duration_ms)
      fail_argument("config: whiteout starts after the end");
  }
};

inline nlohmann::json to_json(const GameConfig& c) {
  nlohmann::json j;
  j["edition"] = to_string(c.edition);
  for (const auto& e : c.expansions)
    j["expansions"].push_back({{"time_ms", e.time_ms}, {"width", e.width}, {"height", e.height}, {"x0", e.x0},
                               {"y0", e.y0}});
  for (const auto& p : c.palettes) {
    nlohmann::json cols = nlohmann::json::array();
    for (Rgb rgb : p.colors) cols.push_back(to_hex(rgb));
    j["palettes"].push_back({{"time_ms", p.time_ms}, {"colors", cols}});
  }
  j["whiteout_start_ms"] = c.whiteout_start_ms ? nlohmann::json(*c.whiteout_start_ms) : nlohmann::json(nullptr);
  j["duration_ms"] = c.duration_ms;
  j["coordinate_offset"] = {c.coord_offset_x, c.coord_offset_y};
  j["background_color"] = c.background_color;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

namespace detail {
inline std::int64_t json_time(const nlohmann::json& j, const char* ms_key, const char* h_key) {
  if (j.contains(ms_key)) return j.at(ms_key).get<std::int64_t>();
  if (j.contains(h_key)) return std::int64_t(std::llround(j.at(h_key).get<double>() * double(kMsPerHour)));
  return 0;
}
}  // namespace detail

/// Times may be given as *_ms or as hours (*_h).
inline GameConfig config_from_json(const nlohmann::json& j) {
  GameConfig c;
  try {
    c.edition = parse_edition(j.at("edition").get<std::string>());
    for (const auto& e : j.at("expansions"))
      c.expansions.push_back({detail::json_time(e, "time_ms", "time_h"), e.at("width").get<int>(),
                              e.at("height").get<int>(), e.value("x0", 0), e.value("y0", 0)});
    for (const auto& p : j.at("palettes")) {
      Palette pal{detail::json_time(p, "time_ms", "time_h"), {}};
      for (const auto& col : p.at("colors")) pal.colors.push_back(parse_hex_color(col.get<std::string>()));
      c.palettes.push_back(std::move(pal));
    }
    if (j.contains("whiteout_start_ms") && !j["whiteout_start_ms"].is_null())
      c.whiteout_start_ms = j["whiteout_start_ms"].get<std::int64_t>();
    else if (j.contains("whiteout_start_h") && !j["whiteout_start_h"].is_null())
      c.whiteout_start_ms = std::int64_t(std::llround(j["whiteout_start_h"].get<double>() * double(kMsPerHour)));
    c.duration_ms = detail::json_time(j, "duration_ms", "duration_h");
    if (j.contains("coordinate_offset")) {
      c.coord_offset_x = j["coordinate_offset"].at(0).get<int>();
      c.coord_offset_y = j["coordinate_offset"].at(1).get<int>();
    }
    c.background_color = j.value("background_color", std::uint8_t{0});
    c.note = j.value("note", std::string{});
  } catch (const nlohmann::json::exception& e) {
    fail_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline GameConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(io::read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    fail_argument(path.string() + ": " + e.what());
  }
}

namespace detail {
inline std::vector<Rgb> hex_list(std::initializer_list<const char*> hex) {
  std::vector<Rgb> out;
  for (const char* h : hex) out.push_back(parse_hex_color(h));
  return out;
}

inline std::vector<Rgb> palette_2017() {
  return hex_list({"#FFFFFF", "#E4E4E4", "#888888", "#222222", "#FFA7D1", "#E50000", "#E59500", "#A06A42",
                   "#E5D900", "#94E044", "#02BE01", "#00D3DD", "#0083C7", "#0000EA", "#CF6EE4", "#820080"});
}

// 2022/2023 dumps carry hex colors; the index order is ours, with white first
// and each day's additions appended.
inline std::vector<Rgb> palette_modern(std::size_t n) {
  auto all = hex_list({"#FFFFFF", "#000000", "#FF4500", "#FFA800", "#FFD635", "#00A368", "#3690EA", "#B44AC0",
                       "#898D90", "#D4D7D9", "#7EED56", "#2450A4", "#51E9F4", "#811E9F", "#FF99AA", "#9C6926",
                       "#BE0039", "#00CC78", "#009EAA", "#493AC1", "#6A5CFF", "#FF3881", "#6D482F", "#00756F",
                       "#6D001A", "#FFF8B8", "#00CCC0", "#94B3FF", "#E4ABFF", "#DE107F", "#FFB470", "#515252"});
  all.resize(n);
  return all;
}
}  // namespace detail

/// Shipped schedules. 2017 is exact; the 2022/2023 change times are
/// approximate (hours since the first action) and can be overridden with a
/// config file. Durations are taken from the dump span.
inline GameConfig default_config(Edition e) {
  GameConfig c;
  c.edition = e;
  const auto h = [](double hours) { return std::int64_t(hours * double(kMsPerHour)); };
  switch (e) {
    case Edition::y2017:
    case Edition::synthetic:
      c.expansions = {{0, 1000, 1000, 0, 0}};
      c.palettes = {{0, detail::palette_2017()}};
      break;
    case Edition::y2022:
      c.expansions = {{0, 1000, 1000, 0, 0}, {h(27), 2000, 1000, 0, 0}, {h(54), 2000, 2000, 0, 0}};
      c.palettes = {{0, detail::palette_modern(16)}, {h(27), detail::palette_modern(24)},
                    {h(54), detail::palette_modern(32)}};
      c.whiteout_start_ms = h(82);
      c.note = "Published durations disagree (81 h vs 87 h); the duration follows the dump span.";
      break;
    case Edition::y2023:
      c.coord_offset_x = 1500;
      c.coord_offset_y = 1000;
      c.expansions = {{0, 1000, 1000, 1000, 500},      {h(13), 1500, 1000, 500, 500},
                      {h(27), 2000, 1000, 500, 500},   {h(40), 2000, 1500, 500, 250},
                      {h(54), 2000, 2000, 500, 0},     {h(72), 2500, 2000, 250, 0},
                      {h(99), 3000, 2000, 0, 0}};
      c.palettes = {{0, detail::palette_modern(8)},
                    {h(24), detail::palette_modern(16)},
                    {h(48), detail::palette_modern(24)},
                    {h(72), detail::palette_modern(32)}};
      c.whiteout_start_ms = h(121);
      break;
  }
  return c;
}

struct Action {
  int x = 0, y = 0;
  std::uint8_t color = 0;
  std::int64_t time = 0;
  PlayerId player = 0;
};

/// Columnar, time-sorted action log.
struct ActionLog {
  std::vector<std::uint16_t> x, y;
  std::vector<std::uint8_t> color;
  std::vector<std::int64_t> time;
  std::vector<PlayerId> player;
  /// Dense player id -> opaque id from the dump.
  std::vector<std::uint64_t> player_ids;
  GameConfig config;

  std::size_t size() const { return time.size(); }
  bool empty() const { return time.empty(); }
  std::size_t player_count() const { return player_ids.size(); }
  int width() const { return config.full_width(); }
  int height() const { return config.full_height(); }

  Action operator[](std::size_t i) const { return {x[i], y[i], color[i], time[i], player[i]}; }
  std::uint32_t pixel(std::size_t i) const { return std::uint32_t(y[i]) * std::uint32_t(width()) + x[i]; }
  Rgb rgb(std::size_t i) const { return config.rgb(color[i]); }

  void reserve(std::size_t n) {
    x.reserve(n);
    y.reserve(n);
    color.reserve(n);
    time.reserve(n);
    player.reserve(n);
  }
  void push_back(const Action& a) {
    x.push_back(std::uint16_t(a.x));
    y.push_back(std::uint16_t(a.y));
    color.push_back(a.color);
    time.push_back(a.time);
    player.push_back(a.player);
  }

  std::unordered_map<std::uint64_t, PlayerId> player_index() const {
    std::unordered_map<std::uint64_t, PlayerId> m;
    m.reserve(player_ids.size());
    for (PlayerId i = 0; i < player_ids.size(); ++i) m.emplace(player_ids[i], i);
    return m;
  }

  /// First index with time > t.
  std::size_t upper_bound(std::int64_t t) const {
    return std::size_t(std::upper_bound(time.begin(), time.end(), t) - time.begin());
  }

  friend bool operator==(const ActionLog& a, const ActionLog& b) {
    return a.x == b.x && a.y == b.y && a.color == b.color && a.time == b.time && a.player == b.player &&
           a.player_ids == b.player_ids && to_json(a.config) == to_json(b.config);
  }

  /// Throws if any log invariant is violated.
  void validate() const {
    config.validate();
    const std::size_t n = size();
    if (x.size() != n || y.size() != n || color.size() != n || player.size() != n)
      fail_data("log: ragged columns");
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && time[i] < time[i - 1]) fail_data("log: not sorted by time at row " + std::to_string(i));
      if (!config.expansion_at(time[i]).contains(x[i], y[i]))
        fail_data("log: row " + std::to_string(i) + " outside the canvas");
      if (color[i] >= config.palette_at(time[i]).colors.size())
        fail_data("log: row " + std::to_string(i) + " has an inactive color");
      if (player[i] >= player_ids.size()) fail_data("log: bad player index");
    }
  }
};

/// Reassigns dense player ids in order of first appearance and drops players
/// without actions.
inline void compact_players(ActionLog& log) {
  std::vector<PlayerId> remap(log.player_ids.size(), 0xffffffffu);
  std::vector<std::uint64_t> ids;
  for (auto& p : log.player) {
    if (remap[p] == 0xffffffffu) {
      remap[p] = PlayerId(ids.size());
      ids.push_back(log.player_ids[p]);
    }
    p = remap[p];
  }
  log.player_ids = std::move(ids);
}

/// Stable sort by time (file order breaks ties), then shift times so the first
/// action is at 0.
inline void finalize_log(ActionLog& log) {
  const std::size_t n = log.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return log.time[a] < log.time[b]; });
  auto permute = [&](auto& col) {
    std::remove_reference_t<decltype(col)> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = col[order[i]];
    col = std::move(out);
  };
  permute(log.x);
  permute(log.y);
  permute(log.color);
  permute(log.time);
  permute(log.player);
  compact_players(log);
}

struct ParseReport {
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::vector<std::string> samples;  // first few diagnostics
};

struct ParseResult {
  ActionLog log;
  ParseReport report;
};

namespace detail {

/// "YYYY-MM-DD HH:MM:SS[.fff][ UTC]" or integer epoch milliseconds.
inline std::optional<std::int64_t> parse_timestamp_ms(std::string_view s) {
  s = io::trim(s);
  std::int64_t epoch;
  if (io::parse_number(s, epoch)) return epoch;
  if (s.size() >= 4 && s.substr(s.size() - 4) == " UTC") s.remove_suffix(4);
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != ' ' && s[10] != 'T') || s[13] != ':' ||
      s[16] != ':')
    return std::nullopt;
  int y, mo, d, hh, mm, ss;
  if (!io::parse_number(s.substr(0, 4), y) || !io::parse_number(s.substr(5, 2), mo) ||
      !io::parse_number(s.substr(8, 2), d) || !io::parse_number(s.substr(11, 2), hh) ||
      !io::parse_number(s.substr(14, 2), mm) || !io::parse_number(s.substr(17, 2), ss))
    return std::nullopt;
  std::int64_t ms = 0;
  if (s.size() > 19) {
    if (s[19] != '.') return std::nullopt;
    std::string_view frac = s.substr(20);
    if (frac.empty() || frac.size() > 9) return std::nullopt;
    std::int64_t v;
    if (!io::parse_number(frac, v)) return std::nullopt;
    for (std::size_t k = frac.size(); k < 3; ++k) v *= 10;
    for (std::size_t k = 3; k < frac.size(); ++k) v /= 10;
    ms = v;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{unsigned(mo)}, day{unsigned(d)}};
  if (!ymd.ok()) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return ((std::int64_t(days) * 24 + hh) * 60 + mm) * 60'000 + std::int64_t(ss) * 1000 + ms;
}

/// Pulls every signed integer out of a coordinate field: "x,y", circle
/// "{X: a, Y: b, R: r}" or rectangle "{X1: a, Y1: b, X2: c, Y2: d}".
inline void extract_integers(std::string_view s, std::vector<long>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < s.size()) {
    const bool digit = s[i] >= '0' && s[i] <= '9';
    const bool sign = s[i] == '-' && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9';
    // Skip the digits that are part of "X1"/"Y2" keys.
    if (digit && i > 0 && (s[i - 1] == 'X' || s[i - 1] == 'Y')) {
      ++i;
      continue;
    }
    if (digit || sign) {
      long v = 0;
      auto [p, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
      if (ec != std::errc{}) return;
      out.push_back(v);
      i = std::size_t(p - s.data());
    } else {
      ++i;
    }
  }
}

struct Schema {
  int time = -1, user = -1, x = -1, y = -1, coord = -1, color = -1;
};

inline Schema detect_schema(const std::vector<std::string_view>& header) {
  Schema s;
  for (int i = 0; i < int(header.size()); ++i) {
    const auto h = io::trim(header[i]);
    if (h == "ts" || h == "timestamp") s.time = i;
    else if (h == "user" || h == "user_hash" || h == "user_id") s.user = i;
    else if (h == "x_coordinate" || h == "x") s.x = i;
    else if (h == "y_coordinate" || h == "y") s.y = i;
    else if (h == "coordinate") s.coord = i;
    else if (h == "color" || h == "pixel_color") s.color = i;
  }
  const bool coords = s.coord >= 0 || (s.x >= 0 && s.y >= 0);
  if (s.time < 0 || s.user < 0 || s.color < 0 || !coords) fail_data("unknown dump schema: missing columns");
  return s;
}

}  // namespace detail

/// Parses one edition's raw CSV dump into a sorted, normalized log. Rows that
/// fail to parse or violate the canvas/palette schedule are counted; more
/// than 0.1% malformed rows aborts.
inline ParseResult parse_dump(const std::filesystem::path& path, Edition edition,
                              std::optional<GameConfig> config = std::nullopt) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open dump " + path.string());
  ParseResult result;
  ActionLog& log = result.log;
  ParseReport& rep = result.report;
  log.config = config ? *config : default_config(edition);
  log.config.validate();
  const GameConfig& cfg = log.config;

  std::string line;
  std::vector<std::string_view> f;
  std::vector<long> nums;
  if (!std::getline(in, line)) fail_data("empty dump " + path.string());
  io::split_csv(line, f);
  const detail::Schema schema = detail::detect_schema(f);
  const std::size_t needed =
      std::size_t(std::max({schema.time, schema.user, schema.x, schema.y, schema.coord, schema.color})) + 1;

  std::unordered_map<std::string, PlayerId> users;
  struct Raw {
    std::int64_t t;
    long x, y;
    std::uint8_t color;
    PlayerId player;
    std::size_t line;
  };
  std::vector<Raw> raw;
  std::size_t lineno = 1;
  auto bad = [&](const std::string& why) {
    ++rep.malformed;
    if (rep.samples.size() < 10) rep.samples.push_back("line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    ++rep.rows;
    io::split_csv(line, f);
    if (f.size() < needed) {
      bad("too few fields");
      continue;
    }
    const auto t = detail::parse_timestamp_ms(f[std::size_t(schema.time)]);
    if (!t) {
      bad("bad timestamp");
      continue;
    }
    long x, y;
    if (schema.coord >= 0) {
      detail::extract_integers(f[std::size_t(schema.coord)], nums);
      if (nums.size() < 2) {
        bad("bad coordinate");
        continue;
      }
      x = nums[0];
      y = nums[1];
    } else if (!io::parse_number(f[std::size_t(schema.x)], x) || !io::parse_number(f[std::size_t(schema.y)], y)) {
      bad("bad coordinate");
      continue;
    }
    const auto cf = io::trim(f[std::size_t(schema.color)]);
    int color_index = -1;
    if (!cf.empty() && cf.front() == '#') {
      try {
        if (auto idx = cfg.color_index(parse_hex_color(cf))) color_index = *idx;
      } catch (const Error&) {
      }
    } else {
      int v;
      if (io::parse_number(cf, v)) color_index = v;
    }
    if (color_index < 0 || color_index > 255) {
      bad("bad color");
      continue;
    }
    std::string user(io::trim(f[std::size_t(schema.user)]));
    auto [it, inserted] = users.try_emplace(std::move(user), PlayerId(users.size()));
    raw.push_back({*t, x + cfg.coord_offset_x, y + cfg.coord_offset_y, std::uint8_t(color_index), it->second,
                   lineno});
  }

  std::int64_t t0 = raw.empty() ? 0 : raw.front().t;
  for (const auto& r : raw) t0 = std::min(t0, r.t);
  std::vector<std::uint64_t> opaque(users.size());
  for (const auto& [name, id] : users) {
    std::uint64_t v;
    opaque[id] = io::parse_number(name, v) ? v : fnv1a64(name);
  }
  log.player_ids = std::move(opaque);
  log.reserve(raw.size());
  for (const auto& r : raw) {
    const std::int64_t t = r.t - t0;
    lineno = r.line;
    if (r.x < 0 || r.y < 0 || !cfg.expansion_at(t).contains(int(r.x), int(r.y))) {
      bad("coordinate outside the canvas");
      continue;
    }
    if (r.color >= cfg.palette_at(t).colors.size()) {
      bad("color " + std::to_string(r.color) + " not in the active palette");
      continue;
    }
    log.push_back({int(r.x), int(r.y), r.color, t, r.player});
  }
  if (rep.malformed * 1000 > rep.rows) {
    std::string msg = path.string() + ": " + std::to_string(rep.malformed) + " of " + std::to_string(rep.rows) +
                      " rows malformed (limit 0.1%)";
    for (const auto& s : rep.samples) msg += "\n  " + s;
    fail_data(msg);
  }
  finalize_log(log);
  if (log.config.duration_ms == 0) log.config.duration_ms = log.empty() ? 0 : log.time.back() + 1;
  log.config.duration_ms = std::max(log.config.duration_ms, log.empty() ? 0 : log.time.back() + 1);
  if (log.config.whiteout_start_ms && *log.config.whiteout_start_ms > log.config.duration_ms)
    log.config.whiteout_start_ms = log.config.duration_ms;
  return result;
}

/// Drops actions at or after the whiteout start; the analysis window then ends there.
inline ActionLog filter_whiteout(const ActionLog& log) {
  if (!log.config.whiteout_start_ms) return log;
  const std::int64_t cut = *log.config.whiteout_start_ms;
  ActionLog out;
  out.config = log.config;
  out.player_ids = log.player_ids;
  const std::size_t keep = std::size_t(std::lower_bound(log.time.begin(), log.time.end(), cut) - log.time.begin());
  out.x.assign(log.x.begin(), log.x.begin() + long(keep));
  out.y.assign(log.y.begin(), log.y.begin() + long(keep));
  out.color.assign(log.color.begin(), log.color.begin() + long(keep));
  out.time.assign(log.time.begin(), log.time.begin() + long(keep));
  out.player.assign(log.player.begin(), log.player.begin() + long(keep));
  compact_players(out);
  out.config.duration_ms = cut;
  out.config.whiteout_start_ms = cut;
  return out;
}

// ---------------------------------------------------------------------------
// Columnar cache

struct CacheManifest {
  int version = kCacheVersion;
  std::size_t rows = 0;
  std::size_t players = 0;
  Edition edition = Edition::synthetic;
  std::uint32_t checksum = 0;  // crc32 over the column checksums
};

inline nlohmann::json write_cache(const ActionLog& log, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json columns;
  std::uint32_t combined = 0;
  auto put = [&](const char* name, const char* dtype, const auto& col) {
    const std::string file = std::string(name) + ".bin";
    io::write_column(dir / file, col);
    const std::uint32_t crc = io::crc32_bytes(col.data(), col.size() * sizeof(col[0]));
    combined = io::crc32_bytes(&crc, sizeof crc, combined);
    columns[name] = {{"file", file}, {"dtype", dtype}, {"crc32", io::hex32(crc)}};
  };
  put("x", "u16le", log.x);
  put("y", "u16le", log.y);
  put("color", "u8", log.color);
  put("time", "i64le", log.time);
  put("player", "u32le", log.player);
  put("player_ids", "u64le", log.player_ids);
  nlohmann::json m{{"schema", "placelab-cache"},
                   {"version", kCacheVersion},
                   {"rows", log.size()},
                   {"players", log.player_count()},
                   {"edition", to_string(log.config.edition)},
                   {"checksum", io::hex32(combined)},
                   {"columns", columns},
                   {"config", to_json(log.config)}};
  io::write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

inline ActionLog read_cache(const std::filesystem::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    fail_data(dir.string() + "/manifest.json: " + e.what());
  }
  if (m.value("schema", "") != "placelab-cache") fail_data(dir.string() + ": not a placelab cache");
  if (m.value("version", 0) != kCacheVersion)
    fail_data(dir.string() + ": cache version " + std::to_string(m.value("version", 0)) + " unsupported");
  ActionLog log;
  const std::size_t rows = m.at("rows").get<std::size_t>();
  const std::size_t players = m.at("players").get<std::size_t>();
  log.config = config_from_json(m.at("config"));
  std::uint32_t combined = 0;
  auto get = [&](const char* name, auto& col, std::size_t n) {
    using T = typename std::remove_reference_t<decltype(col)>::value_type;
    const auto& c = m.at("columns").at(name);
    col = io::read_column<T>(dir / c.at("file").get<std::string>(), n);
    const std::uint32_t crc = io::crc32_bytes(col.data(), col.size() * sizeof(T));
    if (io::hex32(crc) != c.at("crc32").get<std::string>()) fail_data(dir.string() + ": checksum mismatch in " + name);
    combined = io::crc32_bytes(&crc, sizeof crc, combined);
  };
  get("x", log.x, rows);
  get("y", log.y, rows);
  get("color", log.color, rows);
  get("time", log.time, rows);
  get("player", log.player, rows);
  get("player_ids", log.player_ids, players);
  if (io::hex32(combined) != m.at("checksum").get<std::string>()) fail_data(dir.string() + ": manifest checksum mismatch");
  return log;
}

// ---------------------------------------------------------------------------
// Snapshots

/// Canvas state at one time, cropped to the extent active then. Pixel
/// addresses are in the full frame.
struct Canvas {
  Expansion region;
  int frame_width = 0;
  std::vector<ActionId> top;         // region-local row-major; kNoAction if untouched
  std::vector<std::uint8_t> color;   // palette index; background where untouched

  int width() const { return region.width; }
  int height() const { return region.height; }
  std::size_t local(int x, int y) const {
    return std::size_t(y - region.y0) * std::size_t(region.width) + std::size_t(x - region.x0);
  }
  std::uint32_t frame_pixel(std::size_t local_index) const {
    const int lx = int(local_index % std::size_t(region.width));
    const int ly = int(local_index / std::size_t(region.width));
    return std::uint32_t(ly + region.y0) * std::uint32_t(frame_width) + std::uint32_t(lx + region.x0);
  }
  ActionId top_at(int x, int y) const { return top[local(x, y)]; }
  std::uint8_t color_at(int x, int y) const { return color[local(x, y)]; }
};

/// Replays a log forward in time over the full frame. Queries must be
/// non-decreasing in time.
class CanvasReplay {
 public:
  explicit CanvasReplay(const ActionLog& log)
      : log_(&log),
        width_(log.width()),
        top_(log.config.full_area(), kNoAction),
        color_(log.config.full_area(), log.config.background_color) {}

  /// Applies every action with time <= t.
  void advance_to(std::int64_t t) {
    while (next_ < log_->size() && log_->time[next_] <= t) apply_next();
  }

  /// Applies one action; returns the color its pixel showed before.
  std::uint8_t apply_next() {
    const std::size_t i = next_++;
    const std::uint32_t p = log_->pixel(i);
    const std::uint8_t before = color_[p];
    top_[p] = ActionId(i);
    color_[p] = log_->color[i];
    return before;
  }

  bool done() const { return next_ >= log_->size(); }
  std::size_t next_index() const { return next_; }
  const std::vector<ActionId>& top() const { return top_; }
  const std::vector<std::uint8_t>& color() const { return color_; }

  Canvas snapshot(std::int64_t t) const {
    Canvas c;
    c.region = log_->config.expansion_at(t);
    c.frame_width = width_;
    const std::size_t n = std::size_t(c.region.width) * std::size_t(c.region.height);
    c.top.resize(n);
    c.color.resize(n);
    for (int y = 0; y < c.region.height; ++y) {
      const std::size_t src = std::size_t(y + c.region.y0) * std::size_t(width_) + std::size_t(c.region.x0);
      const std::size_t dst = std::size_t(y) * std::size_t(c.region.width);
      std::copy_n(top_.begin() + long(src), c.region.width, c.top.begin() + long(dst));
      std::copy_n(color_.begin() + long(src), c.region.width, c.color.begin() + long(dst));
    }
    return c;
  }

 private:
  const ActionLog* log_;
  int width_;
  std::size_t next_ = 0;
  std::vector<ActionId> top_;
  std::vector<std::uint8_t> color_;
};

/// Last-writer-wins canvas as of time t (inclusive).
inline Canvas canvas_at(const ActionLog& log, std::int64_t t) {
  if (t < 0 || t > log.config.duration_ms)
    fail_argument("canvas_at: time " + std::to_string(t) + " outside [0, " + std::to_string(log.config.duration_ms) +
                  "]");
  CanvasReplay replay(log);
  replay.advance_to(t);
  return replay.snapshot(t);
}

/// Final color of every frame pixel (background where untouched).
inline std::vector<std::uint8_t> final_colors(const ActionLog& log) {
  CanvasReplay replay(log);
  replay.advance_to(std::numeric_limits<std::int64_t>::max());
  return replay.color();
}

}  // namespace placelab
