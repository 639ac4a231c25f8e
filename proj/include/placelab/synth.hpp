#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "placelab/atlas.hpp"
#include "placelab/core.hpp"
#include "placelab/ingest.hpp"
#include "placelab/io.hpp"

namespace placelab::synth {

inline constexpr std::int64_t kCooldownMs = 300'000;

struct Attack {
  double start_h = 0, end_h = 0;
  std::size_t attackers = 0;
  double jitter_s = 300;
};

struct Erasure {
  double start_h = 0;
  std::size_t erasers = 0;
};

struct ArtworkSpec {
  std::string name;
  std::string kind = "stripes_h";  // stripes_h, stripes_v, checker, text
  std::vector<std::uint8_t> colors;
  std::string text;
  int cell = 4;
  int x = 0, y = 0, width = 0, height = 0;
  std::size_t team_size = 10;
  double start_h = 0;
  double join_h = 0;  // members join uniformly over [start, start + join]
  std::optional<double> stop_h;
  double jitter_s = 300;  // mean extra wait beyond the cooldown
  double redundancy = 0;
  double loafing_exponent = 0;
  double effort = 0;  // per-member action budget scale; 0 means unlimited
  std::vector<Attack> attacks;
  std::optional<Erasure> erase;
};

struct Scenario {
  int width = 100, height = 100;
  double duration_h = 24;
  std::uint64_t seed = 0;
  std::size_t noise_players = 0;
  double noise_jitter_s = 900;
  std::vector<ArtworkSpec> artworks;

  std::int64_t duration_ms() const { return std::int64_t(std::llround(duration_h * double(kMsPerHour))); }
};

inline std::int64_t hours_to_ms(double h) { return std::int64_t(std::llround(h * double(kMsPerHour))); }

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.duration_h = j.at("duration_h").get<double>();
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("noise")) {
      s.noise_players = j["noise"].value("players", std::size_t{0});
      s.noise_jitter_s = j["noise"].value("jitter_s", 900.0);
    }
    for (const auto& a : j.at("artworks")) {
      ArtworkSpec w;
      w.name = a.value("name", "artwork" + std::to_string(s.artworks.size()));
      w.kind = a.value("template", std::string("stripes_h"));
      for (const auto& c : a.at("colors")) w.colors.push_back(c.get<std::uint8_t>());
      w.text = a.value("text", std::string());
      w.cell = a.value("cell", 4);
      w.x = a.at("x").get<int>();
      w.y = a.at("y").get<int>();
      w.width = a.at("width").get<int>();
      w.height = a.at("height").get<int>();
      w.team_size = a.at("team_size").get<std::size_t>();
      w.start_h = a.value("start_h", 0.0);
      w.join_h = a.value("join_h", 0.0);
      if (a.contains("stop_h")) w.stop_h = a["stop_h"].get<double>();
      w.jitter_s = a.value("jitter_s", 300.0);
      w.redundancy = a.value("redundancy", 0.0);
      w.loafing_exponent = a.value("loafing_exponent", 0.0);
      w.effort = a.value("effort", 0.0);
      for (const auto& t : a.value("attacks", nlohmann::json::array()))
        w.attacks.push_back({t.at("start_h").get<double>(), t.at("end_h").get<double>(),
                             t.at("attackers").get<std::size_t>(), t.value("jitter_s", 300.0)});
      if (a.contains("erase"))
        w.erase = Erasure{a["erase"].at("start_h").get<double>(), a["erase"].at("erasers").get<std::size_t>()};
      s.artworks.push_back(std::move(w));
    }
  } catch (const nlohmann::json::exception& e) {
    fail_argument(std::string("scenario: ") + e.what());
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_json(nlohmann::json::parse(io::read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    fail_argument("scenario " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Templates

struct Template {
  int width = 0, height = 0;
  std::vector<std::uint8_t> color;  // row-major
  std::uint8_t at(int x, int y) const { return color[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
};

namespace detail {

/// 5x7 glyphs, one row per string, '#' set.
inline const std::map<char, std::array<const char*, 7>>& font() {
  static const std::map<char, std::array<const char*, 7>> f{
      {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
      {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
      {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
      {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
      {'I', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"}},
      {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
      {'N', {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
      {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
      {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
      {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
      {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
      {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
      {'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
  };
  return f;
}

}  // namespace detail

inline Template make_template(const ArtworkSpec& a) {
  if (a.width <= 0 || a.height <= 0) fail_argument("scenario: artwork '" + a.name + "' has no extent");
  if (a.colors.empty()) fail_argument("scenario: artwork '" + a.name + "' has no colors");
  if (a.cell <= 0) fail_argument("scenario: cell must be positive");
  Template t{a.width, a.height, std::vector<std::uint8_t>(std::size_t(a.width) * std::size_t(a.height))};
  const auto& c = a.colors;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      const std::size_t k = std::size_t(y) * std::size_t(a.width) + std::size_t(x);
      if (a.kind == "stripes_h") t.color[k] = c[std::size_t(y / a.cell) % c.size()];
      else if (a.kind == "stripes_v") t.color[k] = c[std::size_t(x / a.cell) % c.size()];
      else if (a.kind == "checker") t.color[k] = c[std::size_t(x / a.cell + y / a.cell) % c.size()];
      else if (a.kind == "text") t.color[k] = c[0];
      else fail_argument("scenario: unknown template '" + a.kind + "'");
    }
  if (a.kind == "text") {
    if (c.size() < 2) fail_argument("scenario: text template needs a background and a glyph color");
    const int scale = a.cell;
    int pen = scale;
    for (char ch : a.text) {
      auto it = detail::font().find(ch);
      if (it == detail::font().end()) fail_argument(std::string("scenario: no glyph for '") + ch + "'");
      for (int gy = 0; gy < 7; ++gy)
        for (int gx = 0; gx < 5; ++gx)
          if (it->second[std::size_t(gy)][gx] == '#')
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx) {
                const int x = pen + gx * scale + sx, y = scale + gy * scale + sy;
                if (x < a.width && y < a.height) t.color[std::size_t(y) * std::size_t(a.width) + std::size_t(x)] = c[1];
              }
      pen += 6 * scale;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Generation

struct ArtworkOracle {
  std::string name;
  double redundancy = 0;
  std::size_t team_size = 0;
  std::optional<std::size_t> member_budget;
  std::size_t team_actions = 0;
  std::size_t wasted = 0;  // team actions repainting a pixel that already showed its color
  std::uint32_t max_area = 0;  // template-correct pixels
  std::uint32_t final_area = 0;
  bool successful = false;
  std::vector<std::uint32_t> member_actions;  // per member with at least one action
  BBox box;
};

struct Generated {
  ActionLog log;
  std::vector<Label> truth;  // artwork index per action; null for background noise
  std::vector<ArtworkOracle> oracle;
  std::vector<AtlasEntry> atlas;  // one rectangle per artwork
};

namespace detail {

enum class Role : std::uint8_t { member, attacker, eraser, noise };

struct Agent {
  Role role;
  std::int32_t artwork;
  std::int64_t from, until;
  double jitter_ms;
  std::optional<std::size_t> budget;
  std::uint32_t actions = 0;
};

struct Work {
  const Template* tmpl = nullptr;
  int x0 = 0, y0 = 0;
  std::set<std::uint32_t> incorrect;     // local indices, raster order
  std::vector<std::uint32_t> correct;    // local indices, unordered
  std::vector<std::uint32_t> slot;       // local -> position in `correct` or npos
  std::vector<std::uint32_t> erase_queue;
  std::uint32_t max_area = 0;
  std::vector<bool> colors_used;
};

inline constexpr std::uint32_t kNoSlot = 0xffffffffu;

}  // namespace detail

inline GameConfig synthetic_config(const Scenario& s) {
  GameConfig c = default_config(Edition::synthetic);
  c.expansions = {{0, s.width, s.height, 0, 0}};
  c.duration_ms = s.duration_ms();
  c.note = "synthetic scenario";
  return c;
}

/// Event-driven simulation: every agent acts, then waits the cooldown plus an
/// exponential jitter. Members work on their artwork (productive actions on
/// one of the first few incorrect pixels in raster order, or with probability
/// `redundancy` a repaint of an already-correct pixel); attackers paint
/// non-template colors inside the artwork; erasers whiten each pixel once;
/// noise agents paint anywhere.
inline Generated generate(const Scenario& s) {
  if (s.width <= 0 || s.height <= 0 || s.width > 65535 || s.height > 65535) fail_argument("scenario: bad canvas size");
  if (!(s.duration_h > 0)) fail_argument("scenario: duration must be positive");
  const GameConfig config = synthetic_config(s);
  const std::size_t palette = config.rgb_table().size();
  const std::uint8_t background = config.background_color;
  const std::int64_t end = s.duration_ms();

  std::vector<Template> templates;
  std::vector<std::int32_t> owner(std::size_t(s.width) * std::size_t(s.height), -1);
  for (std::size_t a = 0; a < s.artworks.size(); ++a) {
    const auto& w = s.artworks[a];
    if (w.x < 0 || w.y < 0 || w.x + w.width > s.width || w.y + w.height > s.height)
      fail_argument("scenario: artwork '" + w.name + "' does not fit the canvas");
    for (auto c : w.colors)
      if (c >= palette || c == background) fail_argument("scenario: artwork '" + w.name + "' uses an invalid color");
    if (w.redundancy < 0 || w.redundancy >= 1) fail_argument("scenario: redundancy must be in [0, 1)");
    templates.push_back(make_template(w));
    for (int y = w.y; y < w.y + w.height; ++y)
      for (int x = w.x; x < w.x + w.width; ++x) {
        auto& o = owner[std::size_t(y) * std::size_t(s.width) + std::size_t(x)];
        if (o >= 0) fail_argument("scenario: artworks '" + s.artworks[std::size_t(o)].name + "' and '" + w.name + "' overlap");
        o = std::int32_t(a);
      }
  }

  std::mt19937_64 rng(mix_seed(s.seed, 0x51));
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](std::size_t n) { return std::size_t(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)); };

  std::vector<detail::Work> work(s.artworks.size());
  Generated g;
  std::vector<detail::Agent> agents;
  for (std::size_t a = 0; a < s.artworks.size(); ++a) {
    const auto& w = s.artworks[a];
    auto& wk = work[a];
    wk.tmpl = &templates[a];
    wk.x0 = w.x;
    wk.y0 = w.y;
    const auto area = std::uint32_t(w.width * w.height);
    for (std::uint32_t k = 0; k < area; ++k) wk.incorrect.insert(k);
    wk.slot.assign(area, detail::kNoSlot);
    wk.colors_used.assign(palette, false);
    for (auto c : w.colors) wk.colors_used[c] = true;

    ArtworkOracle o;
    o.name = w.name;
    o.redundancy = w.redundancy;
    o.team_size = w.team_size;
    o.box = {double(w.x), double(w.y), double(w.x + w.width - 1), double(w.y + w.height - 1)};
    if (w.effort > 0)
      o.member_budget = std::max<std::size_t>(
          1, std::size_t(std::llround(w.effort * std::pow(double(w.team_size), -w.loafing_exponent))));
    g.oracle.push_back(o);

    const std::int64_t start = hours_to_ms(w.start_h);
    std::int64_t stop = w.stop_h ? hours_to_ms(*w.stop_h) : end;
    if (w.erase) stop = std::min(stop, hours_to_ms(w.erase->start_h));
    for (std::size_t m = 0; m < w.team_size; ++m)
      agents.push_back({detail::Role::member, std::int32_t(a), start + hours_to_ms(uniform(0, w.join_h)), stop,
                        w.jitter_s * 1000, o.member_budget});
    for (const auto& atk : w.attacks)
      for (std::size_t m = 0; m < atk.attackers; ++m)
        agents.push_back({detail::Role::attacker, std::int32_t(a), hours_to_ms(atk.start_h), hours_to_ms(atk.end_h),
                          atk.jitter_s * 1000, std::nullopt});
    if (w.erase) {
      wk.erase_queue.resize(area);
      std::iota(wk.erase_queue.begin(), wk.erase_queue.end(), 0u);
      std::shuffle(wk.erase_queue.begin(), wk.erase_queue.end(), rng);
      for (std::size_t m = 0; m < w.erase->erasers; ++m)
        agents.push_back({detail::Role::eraser, std::int32_t(a), hours_to_ms(w.erase->start_h), end, 300'000.0,
                          std::nullopt});
    }
  }
  for (std::size_t m = 0; m < s.noise_players; ++m)
    agents.push_back({detail::Role::noise, -1, 0, end, s.noise_jitter_s * 1000, std::nullopt});

  std::vector<std::uint8_t> canvas(owner.size(), background);
  std::vector<char> touched(owner.size(), 0);
  auto set_correct = [](detail::Work& wk, std::uint32_t k, bool ok) {
    const bool was = wk.slot[k] != detail::kNoSlot;
    if (was == ok) return;
    if (ok) {
      wk.incorrect.erase(k);
      wk.slot[k] = std::uint32_t(wk.correct.size());
      wk.correct.push_back(k);
    } else {
      const auto pos = wk.slot[k];
      wk.slot[wk.correct.back()] = pos;
      std::swap(wk.correct[pos], wk.correct.back());
      wk.correct.pop_back();
      wk.slot[k] = detail::kNoSlot;
      wk.incorrect.insert(k);
    }
  };

  ActionLog& log = g.log;
  log.config = config;
  for (std::size_t p = 0; p < agents.size(); ++p) log.player_ids.push_back(p + 1);
  auto paint = [&](std::size_t agent, int x, int y, std::uint8_t color, std::int64_t t) {
    const std::size_t px = std::size_t(y) * std::size_t(s.width) + std::size_t(x);
    const bool same = touched[px] && canvas[px] == color;
    canvas[px] = color;
    touched[px] = 1;
    log.push_back({x, y, color, t, PlayerId(agent)});
    const auto& ag = agents[agent];
    g.truth.push_back(ag.role == detail::Role::noise ? kNullLabel : Label(ag.artwork));
    if (const auto a = owner[px]; a >= 0) {
      auto& wk = work[std::size_t(a)];
      const auto k = std::uint32_t((y - wk.y0) * wk.tmpl->width + (x - wk.x0));
      set_correct(wk, k, color == wk.tmpl->color[k]);
      wk.max_area = std::max(wk.max_area, std::uint32_t(wk.correct.size()));
    }
    return same;
  };

  using Event = std::pair<std::int64_t, std::size_t>;  // (time, agent); agent order breaks ties
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  auto wait = [&](const detail::Agent& ag) {
    return kCooldownMs + std::int64_t(std::llround(std::exponential_distribution<double>(1.0 / std::max(ag.jitter_ms, 1.0))(rng)));
  };
  for (std::size_t p = 0; p < agents.size(); ++p)
    queue.push({agents[p].from + std::int64_t(std::llround(uniform(0, std::max(agents[p].jitter_ms, 1.0)))), p});
  while (!queue.empty()) {
    const auto [t, p] = queue.top();
    queue.pop();
    if (t >= end) continue;
    auto& ag = agents[p];
    if (t >= ag.until) continue;
    if (ag.budget && ag.actions >= *ag.budget) continue;
    bool acted = false;
    if (ag.role == detail::Role::noise) {
      std::uint8_t c = std::uint8_t(1 + pick(palette - 1));
      if (c == background) c = std::uint8_t((c + 1) % palette);
      paint(p, int(pick(std::size_t(s.width))), int(pick(std::size_t(s.height))), c, t);
      acted = true;
    } else {
      auto& wk = work[std::size_t(ag.artwork)];
      const auto& tm = *wk.tmpl;
      if (ag.role == detail::Role::member) {
        const bool repaint = uniform(0, 1) < s.artworks[std::size_t(ag.artwork)].redundancy;
        if (!wk.incorrect.empty()) {
          std::uint32_t k = detail::kNoSlot;
          if (repaint) {
            if (!wk.correct.empty()) k = wk.correct[pick(wk.correct.size())];
          } else {
            const std::size_t window = std::min<std::size_t>(8, wk.incorrect.size());
            auto it = wk.incorrect.begin();
            std::advance(it, long(pick(window)));
            k = *it;
          }
          if (k != detail::kNoSlot) {
            const bool same = paint(p, wk.x0 + int(k) % tm.width, wk.y0 + int(k) / tm.width, tm.color[k], t);
            auto& o = g.oracle[std::size_t(ag.artwork)];
            ++o.team_actions;
            o.wasted += same;
            acted = true;
          }
        }
      } else if (ag.role == detail::Role::attacker) {
        std::vector<std::uint8_t> options;
        for (std::size_t c = 0; c < palette; ++c)
          if (!wk.colors_used[c] && c != background) options.push_back(std::uint8_t(c));
        if (options.empty()) fail_argument("scenario: no color left for attackers");
        const auto k = std::uint32_t(pick(tm.color.size()));
        paint(p, wk.x0 + int(k) % tm.width, wk.y0 + int(k) / tm.width, options[pick(options.size())], t);
        acted = true;
      } else if (!wk.erase_queue.empty()) {
        const auto k = wk.erase_queue.back();
        wk.erase_queue.pop_back();
        paint(p, wk.x0 + int(k) % tm.width, wk.y0 + int(k) / tm.width, background, t);
        acted = true;
      } else {
        continue;  // nothing left to erase
      }
    }
    if (acted) ++ag.actions;
    queue.push({t + wait(ag), p});
  }

  for (std::size_t a = 0; a < work.size(); ++a) {
    auto& o = g.oracle[a];
    o.max_area = work[a].max_area;
    o.final_area = std::uint32_t(work[a].correct.size());
    o.successful = 10.0 * double(o.final_area) >= 4.0 * double(o.max_area);
    const auto& w = s.artworks[a];
    std::vector<Point> rect{{double(w.x), double(w.y)},
                            {double(w.x + w.width - 1), double(w.y)},
                            {double(w.x + w.width - 1), double(w.y + w.height - 1)},
                            {double(w.x), double(w.y + w.height - 1)}};
    g.atlas.push_back(make_entry(std::to_string(a), w.name, std::nullopt, std::move(rect)));
  }
  for (std::size_t p = 0; p < agents.size(); ++p)
    if (agents[p].role == detail::Role::member && agents[p].actions > 0)
      g.oracle[std::size_t(agents[p].artwork)].member_actions.push_back(agents[p].actions);
  for (auto& o : g.oracle) std::sort(o.member_actions.begin(), o.member_actions.end());
  compact_players(log);
  return g;
}

inline nlohmann::json oracle_to_json(const std::vector<ArtworkOracle>& oracle) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t a = 0; a < oracle.size(); ++a) {
    const auto& o = oracle[a];
    nlohmann::json r{{"artwork", a},
                     {"name", o.name},
                     {"redundancy", o.redundancy},
                     {"team_size", o.team_size},
                     {"team_actions", o.team_actions},
                     {"wasted", o.wasted},
                     {"max_area", o.max_area},
                     {"final_area", o.final_area},
                     {"successful", o.successful},
                     {"members_active", o.member_actions.size()}};
    if (o.member_budget) r["member_budget"] = *o.member_budget;
    j.push_back(r);
  }
  return j;
}

}  // namespace placelab::synth
