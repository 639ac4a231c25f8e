// placelab command-line driver: one subcommand per pipeline stage.

#include <sys/resource.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "placelab/placelab.hpp"
#include "placelab/svg.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace placelab;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string version_text() {
  std::ostringstream o;
  o << "placelab " << kVersion << "\n"
    << "cache schema: placelab-cache " << kCacheVersion << "\n"
    << "embedding schema: placelab-embedding 1\n"
    << "partition rle: PRLE 1\n"
    << "tree dump: placelab-tree 1\n"
    << "run manifest: placelab-run 1";
  return o.str();
}

double peak_rss_mb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return double(u.ru_maxrss) / 1024.0;  // ru_maxrss is in KiB on Linux
}

/// Bookkeeping shared by every subcommand: structured stage logs on stderr
/// and the run manifest written next to the outputs.
class Run {
 public:
  std::string subcommand;
  fs::path out = ".";
  std::optional<std::uint64_t> seed;
  std::string config_text;
  bool quiet = false;

  void begin() {
    started_ = std::chrono::steady_clock::now();
    mark_ = started_;
    fs::create_directories(out);
  }

  void event(json e) {
    if (quiet) return;
    e["subcommand"] = subcommand;
    std::cerr << e.dump() << "\n";
  }

  void stage(const std::string& name, json extra = json::object()) {
    const auto now = std::chrono::steady_clock::now();
    extra["event"] = "stage";
    extra["stage"] = name;
    extra["ms"] = std::chrono::duration<double, std::milli>(now - mark_).count();
    mark_ = now;
    event(std::move(extra));
  }

  void input_file(const fs::path& p) { inputs_[p.string()] = io::hex32(io::crc32_file(p)); }
  void input_cache(const fs::path& dir) {
    auto m = json::parse(io::read_text(dir / "manifest.json"));
    inputs_[dir.string()] = m.at("checksum");
  }

  fs::path output(const std::string& name) {
    const fs::path p = out / name;
    outputs_.push_back(p);
    return p;
  }

  void output_path(const fs::path& p) { outputs_.push_back(p); }

  void write_text(const std::string& name, const std::string& text) { io::write_text_atomic(output(name), text); }

  void write_manifest(const std::string& status, const json& error = nullptr) {
    json outs = json::array();
    for (const auto& p : outputs_) {
      json o{{"path", p.string()}};
      if (fs::is_regular_file(p)) o["crc32"] = io::hex32(io::crc32_file(p));
      else if (fs::is_regular_file(p / "manifest.json")) o["checksum"] = json::parse(io::read_text(p / "manifest.json")).at("checksum");
      outs.push_back(o);
    }
    json m{{"schema", "placelab-run"},
           {"version", 1},
           {"tool_version", kVersion},
           {"subcommand", subcommand},
           {"status", status},
           {"config_hash", io::hex32(std::uint32_t(fnv1a64(config_text))) + io::hex32(std::uint32_t(fnv1a64(config_text) >> 32))},
           {"inputs", inputs_},
           {"seed", seed ? json(*seed) : json(nullptr)},
           {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count()},
           {"peak_rss_mb", peak_rss_mb()},
           {"outputs", outs}};
    if (!error.is_null()) m["error"] = error;
    io::write_text_atomic(out / "run_manifest.json", m.dump(2) + "\n");
  }

 private:
  std::chrono::steady_clock::time_point started_, mark_;
  json inputs_ = json::object();
  std::vector<fs::path> outputs_;
};

fs::path resolve_cache(const std::string& arg, const std::string& fallback_name = "") {
  const char* root = std::getenv("PLACELAB_CACHE_DIR");
  if (!arg.empty()) {
    if (fs::exists(arg) || !root) return arg;
    return fs::path(root) / arg;
  }
  if (root && !fallback_name.empty()) return fs::path(root) / fallback_name;
  fail_argument("--cache is required (or set PLACELAB_CACHE_DIR)");
}

ActionLog load_log(Run& run, const std::string& cache_arg) {
  const fs::path dir = resolve_cache(cache_arg);
  run.input_cache(dir);
  ActionLog log = read_cache(dir);
  run.stage("load_cache", {{"rows", log.size()}, {"players", log.player_count()}});
  return log;
}

std::vector<Label> load_labels(Run& run, const fs::path& path, std::size_t actions) {
  run.input_file(path);
  const Partition p = io::read_partition_csv(path);
  std::vector<Label> labels(actions, kNullLabel);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.items[i] >= actions) fail_data(path.string() + ": action id " + std::to_string(p.items[i]) + " beyond the log");
    labels[p.items[i]] = p.labels[i];
  }
  return labels;
}

void write_labels(Run& run, const std::string& name, const std::vector<Label>& labels, std::string_view label_name) {
  io::write_partition_csv(run.output(name), Partition::from_labels(labels), "action", label_name);
}

std::int64_t hours_to_ms_checked(double h) {
  if (!(h >= 0)) fail_argument("time must be non-negative");
  return std::int64_t(std::llround(h * double(kMsPerHour)));
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    double v = 0;
    if (!io::parse_number(io::trim(tok), v)) fail_argument("bad number '" + tok + "' in list '" + s + "'");
    out.push_back(v);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(10);
  o << v;
  return o.str();
}

/// Footprint IoU of each planted artwork against the predicted cluster that
/// holds most of its actions.
json recovery_report(const ActionLog& log, std::span<const Label> truth, std::span<const Label> pred, double min_iou) {
  std::map<Label, std::set<std::uint32_t>> truth_fp, pred_fp;
  std::map<Label, std::map<Label, std::size_t>> votes;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (pred[i] != kNullLabel) pred_fp[pred[i]].insert(log.pixel(i));
    if (truth[i] == kNullLabel) continue;
    truth_fp[truth[i]].insert(log.pixel(i));
    ++votes[truth[i]][pred[i]];
  }
  json rows = json::array();
  std::size_t recovered = 0;
  for (const auto& [t, fp] : truth_fp) {
    Label best = kNullLabel;
    std::size_t best_votes = 0;
    for (const auto& [c, v] : votes[t])
      if (c != kNullLabel && v > best_votes) best = c, best_votes = v;
    double iou = 0;
    if (best != kNullLabel) {
      const auto& pf = pred_fp[best];
      std::size_t inter = 0;
      for (auto p : fp) inter += pf.count(p);
      iou = double(inter) / double(fp.size() + pf.size() - inter);
    }
    recovered += iou >= min_iou;
    rows.push_back({{"artwork", t}, {"cluster", best}, {"iou", iou}});
  }
  return {{"artworks", rows},
          {"recovered", recovered},
          {"recovered_fraction", truth_fp.empty() ? 0.0 : double(recovered) / double(truth_fp.size())},
          {"min_iou", min_iou}};
}

Node2VecParams embedding_flags(CLI::App* app, Node2VecParams& p) {
  app->add_option("--dims", p.dims, "Embedding dimensions")->capture_default_str();
  app->add_option("--walk-length", p.walk_length, "Random walk length")->capture_default_str();
  app->add_option("--walks", p.walks_per_node, "Walks per node")->capture_default_str();
  app->add_option("--window", p.window, "Skip-gram window")->capture_default_str();
  app->add_option("--epochs", p.epochs, "Training epochs")->capture_default_str();
  app->add_option("--p", p.p, "Return parameter")->capture_default_str();
  app->add_option("--q", p.q, "In-out parameter")->capture_default_str();
  return p;
}

EmbeddingMatrix player_vectors(Run& run, const ActionLog& log, Node2VecParams params, const std::string& reuse,
                               unsigned workers) {
  EmbeddingMatrix m;
  if (!reuse.empty()) {
    run.input_file(reuse);
    m = read_embedding(reuse);
    if (m.rows != log.player_count()) fail_data("embedding rows do not match the log's players");
  } else {
    const PlayerGraph g = build_player_graph(log);
    run.stage("player_graph", {{"nodes", g.node_count}, {"edges", g.edge_count()}});
    params.workers = workers;
    m = embed_players(g, params);
    write_embedding(run.output("embedding.bin"), m, params);
    run.stage("embed_players");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Subcommands

struct IngestOpts {
  std::string dump, edition, config, cache;
  bool keep_whiteout = false;
};

void cmd_ingest(Run& run, const IngestOpts& o) {
  const Edition ed = parse_edition(o.edition);
  std::optional<GameConfig> cfg;
  run.input_file(o.dump);
  if (!o.config.empty()) {
    run.input_file(o.config);
    cfg = load_config(o.config);
  }
  auto parsed = parse_dump(o.dump, ed, cfg);
  run.stage("parse_dump", {{"rows", parsed.report.rows}, {"malformed", parsed.report.malformed}});
  ActionLog log = o.keep_whiteout ? std::move(parsed.log) : filter_whiteout(parsed.log);
  log.validate();
  const fs::path dir = o.cache.empty() ? resolve_cache("", to_string(ed)) : fs::path(o.cache);
  write_cache(log, dir);
  run.output_path(dir);
  json report{{"rows", parsed.report.rows},
              {"malformed", parsed.report.malformed},
              {"samples", parsed.report.samples},
              {"actions", log.size()},
              {"players", log.player_count()},
              {"duration_ms", log.config.duration_ms},
              {"cache", dir.string()}};
  run.write_text("parse_report.json", report.dump(2) + "\n");
  run.stage("write_cache", report);
}

struct AtlasOpts {
  std::string cache, atlas;
  unsigned workers = 1;
};

void cmd_label_atlas(Run& run, const AtlasOpts& o) {
  const ActionLog log = load_log(run, o.cache);
  run.input_file(o.atlas);
  const auto atlas = load_atlas(o.atlas, log.config.coord_offset_x, log.config.coord_offset_y);
  const auto region = log.config.expansion_at(log.config.analysis_end());
  const LabeledCanvas lc = label_canvas(region, log.width(), atlas, o.workers);
  run.stage("label_canvas", {{"entries", atlas.size()}, {"labeled_artworks", lc.distinct_labels()}});
  const auto labels = label_actions(log, lc);
  write_labels(run, "labels.csv", labels, "label");
  std::vector<Label> frame(log.config.full_area(), kNullLabel);
  for (int y = region.y0; y < region.y0 + region.height; ++y)
    for (int x = region.x0; x < region.x0 + region.width; ++x)
      frame[std::size_t(y) * std::size_t(log.width()) + std::size_t(x)] = lc.at(x, y);
  io::write_partition_rle(run.output("pixels.rle"), log.width(), log.height(), frame);

  std::map<std::string, const AtlasEntry*> by_id;
  for (const auto& e : atlas) by_id[e.id] = &e;
  const auto areas = lc.areas();
  std::ostringstream csv;
  csv << "label,id,name,subreddit,polygon_area,pixels\n";
  for (std::size_t l = 0; l < lc.ids.size(); ++l) {
    const AtlasEntry& e = *by_id.at(lc.ids[l]);
    std::string name = e.name;
    std::replace(name.begin(), name.end(), '"', '\'');
    csv << l << ',' << e.id << ",\"" << name << "\"," << e.subreddit.value_or("") << ',' << fmt(e.area()) << ','
        << areas[l] << '\n';
  }
  run.write_text("artworks.csv", csv.str());
  std::size_t labeled = 0;
  for (Label l : labels) labeled += l != kNullLabel;
  run.stage("write_labels", {{"labeled_actions", labeled}});
}

struct SegmentOpts {
  std::string cache, method = "gbis-n2v-ward", embedding, truth;
  double time_h = -1;
  double kappa = 300, delta = 1.0;
  unsigned workers = 1;
  Node2VecParams n2v;
};

void cmd_segment(Run& run, const SegmentOpts& o) {
  SegmentParams sp{o.kappa, o.delta, parse_segment_method(o.method)};
  const ActionLog log = load_log(run, o.cache);
  if (sp.method != SegmentMethod::gbis && !run.seed && o.embedding.empty())
    fail_argument("--seed is required for embedding-based segmentation");
  EmbeddingMatrix unit;
  if (sp.method != SegmentMethod::gbis) {
    Node2VecParams p = o.n2v;
    p.seed = run.seed.value_or(0);
    unit = normalize_rows(center_rows(player_vectors(run, log, p, o.embedding, o.workers)));
  }
  const std::int64_t t = o.time_h < 0 ? log.config.analysis_end() : hours_to_ms_checked(o.time_h);
  const Canvas canvas = canvas_at(log, t);
  const auto seg = segment_snapshot(canvas, log, unit, sp);
  run.stage("segment", {{"time_ms", t}, {"visible", seg.partition.size()}, {"clusters", seg.partition.cluster_count()},
                        {"super_actions", seg.super_actions}});
  io::write_partition_csv(run.output("segments.csv"), seg.partition, "action", "cluster");
  std::vector<Label> frame(log.config.full_area(), kNullLabel);
  for (std::size_t i = 0; i < seg.pixel.size(); ++i) frame[seg.pixel[i]] = seg.partition.labels[i];
  io::write_partition_rle(run.output("segments.rle"), log.width(), log.height(), frame);
  if (!o.truth.empty()) {
    const auto truth = load_labels(run, o.truth, log.size());
    std::vector<Label> tl;
    for (auto a : seg.partition.items) tl.push_back(truth[a]);
    const Partition tp{seg.partition.items, tl};
    json ev{{"ars", ars(tp, seg.partition)}, {"vi", vi(tp, seg.partition)}};
    run.write_text("evaluation.json", ev.dump(2) + "\n");
    run.stage("evaluate", ev);
  }
}

struct DynOpts {
  std::string cache, bands, embedding, truth;
  double cadence_s = 60;
  std::size_t band_ratio = 8;
  double alpha_iou = 0.6, alpha_as = 0.5, alpha_player = 0.8;
  double kappa = 300, delta = 1.0;
  double recovery_iou = 0.7;
  unsigned workers = 1;
  Node2VecParams n2v;
};

void cmd_dyncluster(Run& run, const DynOpts& o) {
  if (!run.seed) fail_argument("--seed is required for dyncluster");
  const ActionLog log = load_log(run, o.cache);
  Node2VecParams p = o.n2v;
  p.seed = *run.seed;
  const EmbeddingMatrix raw = player_vectors(run, log, p, o.embedding, o.workers);
  const EmbeddingMatrix centered = center_rows(raw);
  const EmbeddingMatrix unit = normalize_rows(centered);

  SegmentParams sp{o.kappa, o.delta, SegmentMethod::gbis_n2v_ward};
  const auto cadence = std::int64_t(std::llround(o.cadence_s * 1000));
  const auto times = snapshot_schedule(log.config.analysis_end(), cadence);
  const CoverInstance inst = segment_all_snapshots(log, times, unit, sp, o.workers);
  run.stage("segment_snapshots", {{"snapshots", times.size()}, {"sets", inst.set_count()},
                                  {"memberships", inst.elements.size()}, {"fallbacks", inst.fallback_count}});
  std::vector<std::size_t> bands;
  if (o.bands.empty()) bands = geometric_bands(inst.max_set_size(), o.band_ratio);
  else
    for (double b : parse_list(o.bands)) bands.push_back(std::size_t(b));
  BandedStats stats;
  const auto selected = banded_fgreedy(inst, bands, &stats);
  run.stage("set_cover", {{"selected", selected.size()}, {"bands", bands}, {"peak_heap_bytes", stats.peak_heap_bytes()},
                          {"deferrals", stats.deferrals}});
  MergeParams mp{o.alpha_iou, o.alpha_as, o.alpha_player};
  const auto dc = merge_covers(assign_actions(inst, selected), inst, log, centered, mp);
  run.stage("merge_covers", {{"clusters", dc.cluster_count}});

  write_labels(run, "clusters.csv", dc.assignment, "cluster");
  std::ostringstream lin;
  lin << "cover,snapshot,snapshot_time_ms,size,cluster,rule\n";
  for (const auto& r : dc.lineage)
    lin << r.cover << ',' << r.snapshot << ',' << (r.snapshot >= 0 ? times[std::size_t(r.snapshot)] : -1) << ','
        << inst.set_size(r.cover) << ',' << r.cluster << ',' << to_string(r.rule) << '\n';
  run.write_text("lineage.csv", lin.str());
  json summary{{"snapshots", times.size()},
               {"cadence_ms", cadence},
               {"sets", inst.set_count()},
               {"fallback_sets", inst.fallback_count},
               {"selected", selected.size()},
               {"clusters", dc.cluster_count},
               {"bands", bands},
               {"peak_heap_entries", stats.peak_heap_entries},
               {"peak_heap_bytes", stats.peak_heap_bytes()},
               {"deferrals", stats.deferrals}};
  if (!o.truth.empty()) {
    const auto truth = load_labels(run, o.truth, log.size());
    const auto tp = Partition::from_labels(truth), pp = Partition::from_labels(dc.assignment);
    summary["ars"] = ars(tp, pp);
    summary["vi"] = vi(tp, pp);
    summary["recovery"] = recovery_report(log, truth, dc.assignment, o.recovery_iou);
    run.stage("evaluate", {{"ars", summary["ars"]}, {"vi", summary["vi"]}});
  }
  run.write_text("dyncluster.json", summary.dump(2) + "\n");
}

struct MetricsOpts {
  std::string cache, labels, bins = "1,100,10000", times = "24,48,72", categories, artworks;
  std::vector<Label> clusters;
  bool full_duration = false;
  bool svg = false;
};

void cmd_metrics(Run& run, const MetricsOpts& o) {
  const ActionLog log = load_log(run, o.cache);
  const auto labels = load_labels(run, o.labels, log.size());
  json summary;
  auto plot = [&](const std::string& name, const svg::Plot& p) {
    if (o.svg) run.write_text(name, p.render());
  };

  {
    const auto act = activity_icdf(log, o.full_duration);
    std::ostringstream csv;
    csv << "actions_per_hour,fraction_at_least\n";
    svg::Plot p{"Actions per hour per player", "actions/hour", "fraction of players >= x", true, true, {}};
    p.series.push_back({"players", {}, {}, false});
    for (const auto& pt : act.curve) {
      csv << fmt(pt.x) << ',' << fmt(pt.fraction) << '\n';
      p.series[0].x.push_back(pt.x);
      p.series[0].y.push_back(pt.fraction);
    }
    run.write_text("activity_icdf.csv", csv.str());
    plot("activity_icdf.svg", p);
    if (!act.rate.empty()) summary["max_actions_per_hour"] = *std::max_element(act.rate.begin(), act.rate.end());
  }
  {
    const auto pr = classify_actions(log);
    std::ostringstream csv;
    csv << "hour,final,match,adversary,total,final_pct,match_pct,adversary_pct,final_cum_pct,match_cum_pct,"
           "adversary_cum_pct\n";
    svg::Plot p{"Action classes per hour", "hour", "% of all actions", false, false, {}};
    p.series = {{"final", {}, {}, false}, {"match", {}, {}, false}, {"adversary", {}, {}, false}};
    for (const auto& b : pr.buckets) {
      csv << b.hour << ',' << b.final << ',' << b.match << ',' << b.adversary << ',' << b.total() << ','
          << fmt(b.final_pct) << ',' << fmt(b.match_pct) << ',' << fmt(b.adversary_pct) << ',' << fmt(b.final_cum_pct)
          << ',' << fmt(b.match_cum_pct) << ',' << fmt(b.adversary_cum_pct) << '\n';
      const double pcts[3] = {b.final_pct, b.match_pct, b.adversary_pct};
      for (int s = 0; s < 3; ++s) {
        p.series[std::size_t(s)].x.push_back(double(b.hour));
        p.series[std::size_t(s)].y.push_back(pcts[s]);
      }
    }
    run.write_text("progression.csv", csv.str());
    plot("progression.svg", p);
  }
  run.stage("engagement");

  const auto coalitions = build_coalitions(log, labels);
  {
    std::ostringstream csv;
    csv << "artwork,members,actions,agreeing,wasted,adversarial,max_area,final_area,successful\n";
    for (const auto& c : coalitions)
      csv << c.artwork << ',' << c.size() << ',' << c.actions << ',' << c.agreeing << ',' << c.wasted << ','
          << c.adversarial << ',' << c.area.max_area << ',' << c.area.final_area << ','
          << (retains_area(c.area.final_area, c.area.max_area) ? 1 : 0) << '\n';
    run.write_text("coalitions.csv", csv.str());
  }
  {
    const auto cc = coordination_cost(coalitions);
    std::ostringstream csv;
    csv << "artwork,coalition_size,wasted_ratio\n";
    svg::Plot p{"Coordination cost", "coalition size", "wasted / agreeing", true, false, {}};
    p.series.push_back({"coalitions", {}, {}, true});
    for (const auto& pt : cc.points) {
      csv << pt.artwork << ',' << pt.size << ',' << fmt(pt.ratio) << '\n';
      p.series[0].x.push_back(double(pt.size));
      p.series[0].y.push_back(pt.ratio);
    }
    run.write_text("coordination_cost.csv", csv.str());
    plot("coordination_cost.svg", p);
    summary["coordination_cost"] = {{"slope", cc.fit.slope}, {"intercept", cc.fit.intercept}, {"excluded", cc.excluded.size()}};
  }
  {
    const auto edges = parse_list(o.bins);
    if (edges.empty()) fail_argument("--bins needs at least one edge");
    std::vector<SizeBin> bins;
    for (std::size_t i = 0; i < edges.size(); ++i)
      bins.push_back({edges[i], i + 1 < edges.size() ? edges[i + 1] : std::numeric_limits<double>::infinity()});
    const auto lf = loafing_icdf(coalitions, bins);
    std::ostringstream csv;
    csv << "bin_lo,bin_hi,median_actions,fraction_at_least\n";
    svg::Plot p{"Median actions per member", "median actions", "fraction of coalitions >= x", true, false, {}};
    json empty = json::array();
    for (const auto& b : lf) {
      const std::string name = "[" + fmt(b.bin.lo) + ", " + fmt(b.bin.hi) + ")";
      if (b.empty()) empty.push_back(name);
      p.series.push_back({name, {}, {}, false});
      for (const auto& pt : b.curve) {
        csv << fmt(b.bin.lo) << ',' << fmt(b.bin.hi) << ',' << fmt(pt.x) << ',' << fmt(pt.fraction) << '\n';
        p.series.back().x.push_back(pt.x);
        p.series.back().y.push_back(pt.fraction);
      }
    }
    run.write_text("loafing.csv", csv.str());
    plot("loafing.svg", p);
    summary["loafing_empty_bins"] = empty;
  }
  {
    std::ostringstream csv;
    csv << "time_h,bin_lo,bin_hi,count,mass\n";
    svg::Plot p{"Coalition sizes", "size / population", "share of coalitions", true, true, {}};
    for (double h : parse_list(o.times)) {
      const auto t = std::int64_t(std::llround(h * double(kMsPerHour)));
      if (t > log.config.duration_ms) {
        run.event({{"event", "skip"}, {"what", "coalition_sizes"}, {"time_h", h}, {"reason", "after the end"}});
        continue;
      }
      const auto d = coalition_size_distribution(log, labels, t);
      p.series.push_back({fmt(h) + " h", {}, {}, false});
      for (const auto& b : d.histogram) {
        csv << fmt(h) << ',' << fmt(b.lo) << ',' << fmt(b.hi) << ',' << b.count << ',' << fmt(b.mass) << '\n';
        p.series.back().x.push_back(std::sqrt(b.lo * b.hi));
        p.series.back().y.push_back(b.mass);
      }
    }
    run.write_text("coalition_sizes.csv", csv.str());
    plot("coalition_sizes.svg", p);
  }
  for (Label c : o.clusters) {
    const auto tl = conflict_timeline(log, labels, c);
    std::ostringstream csv;
    csv << "hour,collaborative,adversarial\n";
    svg::Plot p{"Cluster " + std::to_string(c), "hour", "actions", false, false, {}};
    p.series = {{"collaborative", {}, {}, false}, {"adversarial", {}, {}, false}};
    for (const auto& b : tl) {
      csv << b.hour << ',' << b.collaborative << ',' << b.adversarial << '\n';
      p.series[0].x.push_back(double(b.hour));
      p.series[0].y.push_back(double(b.collaborative));
      p.series[1].x.push_back(double(b.hour));
      p.series[1].y.push_back(double(b.adversarial));
    }
    run.write_text("conflict_" + std::to_string(c) + ".csv", csv.str());
    plot("conflict_" + std::to_string(c) + ".svg", p);
  }
  const auto avp = actions_vs_pixels(log, labels);
  {
    std::ostringstream csv;
    csv << "artwork,actions,final_pixels\n";
    svg::Plot p{"Actions vs pixels", "final pixels", "actions", true, true, {}};
    p.series.push_back({"artworks", {}, {}, true});
    for (const auto& r : avp.rows) {
      csv << r.artwork << ',' << r.actions << ',' << r.pixels << '\n';
      p.series[0].x.push_back(double(r.pixels));
      p.series[0].y.push_back(double(r.actions));
    }
    run.write_text("actions_vs_pixels.csv", csv.str());
    plot("actions_vs_pixels.svg", p);
    summary["actions_per_pixel_slope"] = avp.fit.slope;
  }
  {
    const auto grid = activity_heatmap(log);
    std::ostringstream csv;
    const auto w = std::size_t(log.width());
    for (std::size_t y = 0; y < std::size_t(log.height()); ++y) {
      for (std::size_t x = 0; x < w; ++x) csv << (x ? "," : "") << grid[y * w + x];
      csv << '\n';
    }
    run.write_text("heatmap.csv", csv.str());
  }
  run.stage("collaboration");

  if (!o.categories.empty()) {
    if (o.artworks.empty()) fail_argument("--categories needs --artworks (from label-atlas)");
    run.input_file(o.categories);
    run.input_file(o.artworks);
    std::map<std::string, std::string> cat;
    {
      std::ifstream in(o.categories);
      std::string line;
      std::vector<std::string_view> f;
      while (std::getline(in, line)) {
        io::split_csv(line, f);
        if (f.size() >= 2) {
          auto sub = *detail::normalize_subreddit(std::string(io::trim(f[0])));
          cat[sub] = std::string(io::trim(f[1]));
        }
      }
    }
    std::map<Label, std::optional<std::string>> sub_of;
    {
      std::ifstream in(o.artworks);
      std::string line;
      std::vector<std::string_view> f;
      std::getline(in, line);
      while (std::getline(in, line)) {
        io::split_csv(line, f);
        Label l;
        if (f.size() < 4 || !io::parse_number(f[0], l)) continue;
        const auto s = io::trim(f[3]);
        sub_of[l] = s.empty() ? std::nullopt : std::optional<std::string>(std::string(s));
      }
    }
    std::map<Label, std::size_t> pixels;
    for (const auto& r : avp.rows) pixels[r.artwork] = r.pixels;
    std::vector<ArtworkSummary> arts;
    for (const auto& c : coalitions) {
      auto it = sub_of.find(c.artwork);
      arts.push_back({c.artwork, it == sub_of.end() ? std::nullopt : it->second, double(c.size()),
                      double(pixels[c.artwork])});
    }
    std::ostringstream csv;
    csv << "category,artworks,mean_players,mean_area\n";
    for (const auto& r : category_rollup(arts, cat))
      csv << r.category << ',' << r.artworks << ',' << fmt(r.mean_players) << ',' << fmt(r.mean_area) << '\n';
    run.write_text("categories.csv", csv.str());
  }
  const auto gs = summarize(log, coalitions);
  summary["actions"] = gs.actions;
  summary["players"] = gs.players;
  summary["actions_per_player"] = gs.actions_per_player;
  summary["artworks"] = gs.artworks;
  summary["mean_coalition_size"] = gs.mean_coalition_size;
  summary["final_fraction"] = gs.final_fraction;
  run.write_text("summary.json", summary.dump(2) + "\n");
  run.stage("summary", summary);
}

struct PredictOpts {
  std::string cache, labels;
  std::size_t snapshots = 100;
  std::uint32_t a_min = 20;
  std::size_t depth = 6, min_leaf = 20;
  double slice_h = 48;
  unsigned workers = 1;
};

void cmd_predict(Run& run, const PredictOpts& o) {
  if (!run.seed) fail_argument("--seed is required for predict");
  const ActionLog log = load_log(run, o.cache);
  const auto labels = load_labels(run, o.labels, log.size());
  const auto ex = extract_examples(log, labels, {o.snapshots, o.a_min, *run.seed, o.workers});
  for (std::size_t s = 0; s < ex.snapshot_times.size(); ++s)
    if (ex.rows_per_snapshot[s] == 0)
      run.event({{"event", "empty_snapshot"}, {"time_ms", ex.snapshot_times[s]}});
  std::ostringstream csv;
  csv << "snapshot_time_ms,cluster,start_time,artwork_size,coalition_size,color_entropy,successful\n";
  for (const auto& e : ex.examples)
    csv << e.snapshot_time << ',' << e.cluster << ',' << fmt(e.start_time) << ',' << fmt(e.artwork_size) << ','
        << fmt(e.coalition_size) << ',' << fmt(e.color_entropy) << ',' << (e.successful ? 1 : 0) << '\n';
  run.write_text("examples.csv", csv.str());
  run.stage("extract_examples", {{"examples", ex.examples.size()}});

  const auto split = split_by_cluster(ex.examples, *run.seed);
  const TreeModel model = train_tree(split.train, {o.depth, o.min_leaf, *run.seed});
  run.write_text("tree.txt", model.dump());
  run.stage("train_tree", {{"train", split.train.size()}, {"test", split.test.size()}, {"nodes", model.nodes.size()}});

  const auto cut = std::int64_t(std::llround(o.slice_h * double(kMsPerHour)));
  struct Slice {
    std::string name;
    std::vector<SuccessExample> rows;
  };
  const std::vector<Slice> slices{{"all", split.test},
                                  {"0-" + fmt(o.slice_h) + "h", time_slice(split.test, 0, cut)},
                                  {fmt(o.slice_h) + "h-end", time_slice(split.test, cut, std::numeric_limits<std::int64_t>::max())}};
  std::ostringstream ev;
  ev << "slice,examples,f1,pr_auc,positive_fraction,note\n";
  json evj = json::array();
  for (const auto& s : slices) {
    try {
      const auto e = evaluate(model, s.rows);
      ev << s.name << ',' << e.examples << ',' << fmt(e.f1) << ',' << fmt(e.pr_auc) << ',' << fmt(e.positive_fraction)
         << ",\n";
      evj.push_back({{"slice", s.name}, {"f1", e.f1}, {"pr_auc", e.pr_auc}, {"positive_fraction", e.positive_fraction}});
    } catch (const Error& err) {
      ev << s.name << ',' << s.rows.size() << ",,,," << '"' << err.what() << "\"\n";
      evj.push_back({{"slice", s.name}, {"error", err.what()}});
    }
  }
  run.write_text("evaluation.csv", ev.str());
  run.stage("evaluate", {{"slices", evj}});
}

struct GrangerOpts {
  std::string x, y;
  std::size_t max_lag = 24;
  bool difference = false;
};

void cmd_granger(Run& run, const GrangerOpts& o) {
  run.input_file(o.x);
  run.input_file(o.y);
  const auto xs = read_time_series(o.x), ys = read_time_series(o.y);
  if (xs.size() != ys.size() || xs.start != ys.start || xs.step != ys.step)
    fail_data("granger: series do not share the same buckets");
  const auto r = granger_test(xs.values, ys.values, {o.max_lag, o.difference});
  std::ostringstream csv;
  csv << "lag,f_statistic,df1,df2,p_value\n"
      << r.lag << ',' << fmt(r.f_statistic) << ',' << r.df1 << ',' << r.df2 << ',' << fmt(r.p_value) << '\n';
  run.write_text("granger.csv", csv.str());
  std::cout << "lag " << r.lag << "\nF " << fmt(r.f_statistic) << "\np_value " << fmt(r.p_value) << "\n";
  run.stage("granger", {{"lag", r.lag}, {"p_value", r.p_value}});
}

struct AnomalyOpts {
  std::string series;
  std::size_t window = 25;
  double threshold = 3.5;
};

void cmd_anomalies(Run& run, const AnomalyOpts& o) {
  run.input_file(o.series);
  const auto ts = read_time_series(o.series);
  const auto scores = anomaly_scores(ts.values, o.window);
  std::ostringstream csv;
  csv << "index,bucket_start,value,score\n";
  std::size_t n = 0;
  for (std::size_t t = 0; t < scores.size(); ++t)
    if (scores[t] > o.threshold) {
      csv << t << ',' << fmt(ts.start + double(t) * ts.step) << ',' << fmt(ts.values[t]) << ',' << fmt(scores[t]) << '\n';
      ++n;
    }
  run.write_text("anomalies.csv", csv.str());
  std::cout << "anomalies " << n << "\n";
  run.stage("anomalies", {{"count", n}});
}

struct SynthOpts {
  std::string scenario;
};

void cmd_synth(Run& run, const SynthOpts& o) {
  if (!run.seed) fail_argument("--seed is required for synth");
  fs::path path = o.scenario;
  if (!fs::exists(path) && fs::exists(path.string() + ".json")) path += ".json";
  run.input_file(path);
  auto sc = synth::load_scenario(path);
  sc.seed = *run.seed;
  const auto g = synth::generate(sc);
  run.stage("generate", {{"actions", g.log.size()}, {"players", g.log.player_count()}});
  write_cache(g.log, run.output("cache"));
  write_labels(run, "truth.csv", g.truth, "artwork");
  run.write_text("oracle.json", synth::oracle_to_json(g.oracle).dump(2) + "\n");
  run.write_text("atlas.json", atlas_to_json(g.atlas).dump(2) + "\n");
  run.stage("write");
}

struct EvalOpts {
  std::string pred, truth;
  bool base2 = false;
};

void cmd_eval(Run& run, const EvalOpts& o) {
  run.input_file(o.pred);
  run.input_file(o.truth);
  const Partition p = io::read_partition_csv(o.pred), t = io::read_partition_csv(o.truth);
  const double a = ars(t, p), v = vi(t, p, o.base2);
  std::cout << "ARS " << fmt(a) << "\nVI " << fmt(v) << "\n";
  run.write_text("eval.json", json{{"ars", a}, {"vi", v}, {"vi_base", o.base2 ? "2" : "e"}}.dump(2) + "\n");
  run.stage("eval", {{"ars", a}, {"vi", v}});
}

/// Effective options minus the ones that only say where and how loudly to write.
std::string hashed_config(const CLI::App& sub) {
  std::istringstream in(sub.config_to_str(true, false));
  std::string line, kept;
  while (std::getline(in, line))
    if (line.rfind("out=", 0) != 0 && line.rfind("quiet=", 0) != 0) kept += line + "\n";
  return kept;
}

int exit_code(ErrorKind k) { return k == ErrorKind::invalid_argument ? 2 : 1; }

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::data: return "data";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

void report_error(const std::string& subcommand, const std::string& kind, const std::string& message) {
  std::cerr << json{{"event", "error"}, {"subcommand", subcommand}, {"kind", kind}, {"message", message}}.dump()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch analysis of collaborative pixel-canvas games"};
  app.set_version_flag("--version", version_text());
  app.require_subcommand(1);

  Run run;
  std::uint64_t seed = 0;
  std::string out = ".";
  auto common = [&](CLI::App* sub, bool seeded) {
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_flag("--quiet", run.quiet, "Suppress structured logs");
    if (seeded) sub->add_option("--seed", seed, "Seed for every random choice");
  };

  IngestOpts ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Parse a raw dump into the columnar cache");
  s_ingest->add_option("--dump", ingest.dump, "Raw CSV dump")->required()->check(CLI::ExistingFile);
  s_ingest->add_option("--edition", ingest.edition, "2017, 2022, 2023 or synthetic")->required();
  s_ingest->add_option("--config", ingest.config, "Game config JSON overriding the shipped schedule")->check(CLI::ExistingFile);
  s_ingest->add_option("--cache", ingest.cache, "Cache directory (default: $PLACELAB_CACHE_DIR/<edition>)");
  s_ingest->add_flag("--keep-whiteout", ingest.keep_whiteout, "Keep actions from the whiteout phase");
  common(s_ingest, false);

  AtlasOpts atlas;
  auto* s_atlas = app.add_subcommand("label-atlas", "Label final-canvas pixels and actions from atlas polygons");
  s_atlas->add_option("--cache", atlas.cache, "Cache directory");
  s_atlas->add_option("--atlas", atlas.atlas, "Atlas JSON")->required()->check(CLI::ExistingFile);
  s_atlas->add_option("--workers", atlas.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  common(s_atlas, false);

  SegmentOpts seg;
  auto* s_seg = app.add_subcommand("segment", "Segment one snapshot");
  s_seg->add_option("--cache", seg.cache, "Cache directory");
  s_seg->add_option("--time-h", seg.time_h, "Snapshot time in hours (default: end of analysis)");
  s_seg->add_option("--method", seg.method, "gbis, n2v-ward or gbis-n2v-ward")->capture_default_str();
  s_seg->add_option("--kappa", seg.kappa, "GBIS scale")->capture_default_str();
  s_seg->add_option("--delta", seg.delta, "Ward distance threshold")->capture_default_str();
  s_seg->add_option("--embedding", seg.embedding, "Reuse an embedding file")->check(CLI::ExistingFile);
  s_seg->add_option("--truth", seg.truth, "Action labels to score against")->check(CLI::ExistingFile);
  s_seg->add_option("--workers", seg.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  embedding_flags(s_seg, seg.n2v);
  common(s_seg, true);

  DynOpts dyn;
  auto* s_dyn = app.add_subcommand("dyncluster", "Cluster actions across snapshots into artworks over time");
  s_dyn->add_option("--cache", dyn.cache, "Cache directory");
  s_dyn->add_option("--cadence", dyn.cadence_s, "Snapshot cadence in seconds")->capture_default_str()->check(CLI::PositiveNumber);
  s_dyn->add_option("--bands", dyn.bands, "Descending band thresholds, e.g. 4096,512,64,8,1");
  s_dyn->add_option("--band-ratio", dyn.band_ratio, "Geometric band ratio when --bands is absent")->capture_default_str();
  s_dyn->add_option("--alpha-iou", dyn.alpha_iou, "Footprint IoU threshold")->capture_default_str();
  s_dyn->add_option("--alpha-as", dyn.alpha_as, "Area similarity threshold")->capture_default_str();
  s_dyn->add_option("--alpha-player", dyn.alpha_player, "Player embedding cosine threshold")->capture_default_str();
  s_dyn->add_option("--kappa", dyn.kappa, "GBIS scale")->capture_default_str();
  s_dyn->add_option("--delta", dyn.delta, "Ward distance threshold")->capture_default_str();
  s_dyn->add_option("--embedding", dyn.embedding, "Reuse an embedding file")->check(CLI::ExistingFile);
  s_dyn->add_option("--truth", dyn.truth, "Action labels to score against")->check(CLI::ExistingFile);
  s_dyn->add_option("--recovery-iou", dyn.recovery_iou, "IoU counting an artwork as recovered")->capture_default_str();
  s_dyn->add_option("--workers", dyn.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  embedding_flags(s_dyn, dyn.n2v);
  common(s_dyn, true);

  MetricsOpts met;
  auto* s_met = app.add_subcommand("metrics", "Engagement, collaboration and competition tables");
  s_met->add_option("--cache", met.cache, "Cache directory");
  s_met->add_option("--labels", met.labels, "Action labels (atlas or clusters)")->required()->check(CLI::ExistingFile);
  s_met->add_option("--bins", met.bins, "Coalition size bin edges for loafing")->capture_default_str();
  s_met->add_option("--times", met.times, "Hours at which to take coalition size distributions")->capture_default_str();
  s_met->add_option("--cluster", met.clusters, "Cluster ids for conflict timelines");
  s_met->add_option("--categories", met.categories, "CSV subreddit,category")->check(CLI::ExistingFile);
  s_met->add_option("--artworks", met.artworks, "artworks.csv from label-atlas")->check(CLI::ExistingFile);
  s_met->add_flag("--full-duration", met.full_duration, "Rates over the whole game instead of each player's span");
  s_met->add_flag("--svg", met.svg, "Also write SVG plots");
  common(s_met, false);

  PredictOpts pred;
  auto* s_pred = app.add_subcommand("predict", "Coalition success dataset and decision tree");
  s_pred->add_option("--cache", pred.cache, "Cache directory");
  s_pred->add_option("--labels", pred.labels, "Dynamic cluster labels")->required()->check(CLI::ExistingFile);
  s_pred->add_option("--snapshots", pred.snapshots, "Sampled snapshots")->capture_default_str();
  s_pred->add_option("--a-min", pred.a_min, "Matching pixels for an active cluster")->capture_default_str();
  s_pred->add_option("--depth", pred.depth, "Tree depth")->capture_default_str();
  s_pred->add_option("--min-leaf", pred.min_leaf, "Minimum leaf size")->capture_default_str();
  s_pred->add_option("--slice", pred.slice_h, "Hour separating the two evaluation slices")->capture_default_str();
  s_pred->add_option("--workers", pred.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  common(s_pred, true);

  auto* s_stats = app.add_subcommand("stats", "Time-series statistics");
  s_stats->require_subcommand(1);
  GrangerOpts gr;
  auto* s_gr = s_stats->add_subcommand("granger", "Granger causality of x on y");
  s_gr->add_option("--x", gr.x, "Cause series CSV")->required()->check(CLI::ExistingFile);
  s_gr->add_option("--y", gr.y, "Effect series CSV")->required()->check(CLI::ExistingFile);
  s_gr->add_option("--max-lag", gr.max_lag, "Largest lag tried")->capture_default_str();
  s_gr->add_flag("--difference", gr.difference, "Difference both series first");
  common(s_gr, false);
  AnomalyOpts an;
  auto* s_an = s_stats->add_subcommand("anomalies", "Rolling median/MAD anomaly detection");
  s_an->add_option("--series", an.series, "Series CSV")->required()->check(CLI::ExistingFile);
  s_an->add_option("--window", an.window, "Window length")->capture_default_str();
  s_an->add_option("--threshold", an.threshold, "Robust z threshold")->capture_default_str();
  common(s_an, false);

  SynthOpts syn;
  auto* s_syn = app.add_subcommand("synth", "Generate a synthetic game with planted ground truth");
  s_syn->add_option("--scenario", syn.scenario, "Scenario JSON")->required();
  common(s_syn, true);

  EvalOpts ev;
  auto* s_ev = app.add_subcommand("eval", "Compare two partitions (ARS and VI)");
  s_ev->add_option("--pred", ev.pred, "Predicted labels CSV")->required()->check(CLI::ExistingFile);
  s_ev->add_option("--truth", ev.truth, "Reference labels CSV")->required()->check(CLI::ExistingFile);
  s_ev->add_flag("--base2", ev.base2, "VI in bits");
  common(s_ev, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error(argc > 1 ? argv[1] : "", "usage", e.what());
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  if (active == s_stats) active = s_stats->get_subcommands().front();
  run.subcommand = active == s_gr ? "stats granger" : active == s_an ? "stats anomalies" : active->get_name();
  run.out = out;
  if (auto* opt = active->get_option_no_throw("--seed"); opt && opt->count()) run.seed = seed;
  run.config_text = run.subcommand + "\n" + hashed_config(*active);

  try {
    run.begin();
    if (active == s_ingest) cmd_ingest(run, ingest);
    else if (active == s_atlas) cmd_label_atlas(run, atlas);
    else if (active == s_seg) cmd_segment(run, seg);
    else if (active == s_dyn) cmd_dyncluster(run, dyn);
    else if (active == s_met) cmd_metrics(run, met);
    else if (active == s_pred) cmd_predict(run, pred);
    else if (active == s_gr) cmd_granger(run, gr);
    else if (active == s_an) cmd_anomalies(run, an);
    else if (active == s_syn) cmd_synth(run, syn);
    else if (active == s_ev) cmd_eval(run, ev);
    run.write_manifest("ok");
    run.event({{"event", "done"}, {"peak_rss_mb", peak_rss_mb()}});
    return 0;
  } catch (const Error& e) {
    report_error(run.subcommand, kind_name(e.kind()), e.what());
    try {
      run.write_manifest("error", {{"kind", kind_name(e.kind())}, {"message", e.what()}});
    } catch (...) {
    }
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error(run.subcommand, "internal", e.what());
    try {
      run.write_manifest("error", {{"kind", "internal"}, {"message", e.what()}});
    } catch (...) {
    }
    return 1;
  }
}
