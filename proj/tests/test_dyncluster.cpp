#include <gtest/gtest.h>

#include "support.hpp"

using namespace placelab;

namespace {

CoverInstance instance(std::size_t universe, const std::vector<std::vector<ItemId>>& sets) {
  CoverInstance inst;
  inst.universe_size = universe;
  for (std::size_t s = 0; s < sets.size(); ++s) inst.add_set(sets[s], {std::int32_t(s), 0, false});
  return inst;
}

struct Pipeline {
  synth::Generated game;
  DynamicResult result;
};

Pipeline run_fixture(const std::string& name) {
  Pipeline p;
  p.game = synth::generate(synth::load_scenario(testing_support::fixture(name)));
  DynamicParams params;
  params.node2vec.seed = 7;
  p.result = run_dynamic_clustering(p.game.log, params);
  return p;
}

Partition truth_partition(const synth::Generated& g) { return Partition::from_labels(g.truth); }

}  // namespace

TEST(AssignActions, LargestSetWins) {
  std::vector<ItemId> big{0, 1, 2, 3, 4, 5, 6}, small{5, 6, 7};
  const auto inst = instance(8, {small, big});
  const std::uint32_t sel[2] = {1, 0};
  const auto dc = assign_actions(inst, sel);
  // Shared actions 5 and 6 follow the size-7 set (selection index 0).
  EXPECT_EQ(dc.cover_of_action, (std::vector<Label>{0, 0, 0, 0, 0, 0, 0, 1}));
  EXPECT_EQ(dc.cluster_count, 2u);
  ASSERT_EQ(dc.lineage.size(), 2u);
  EXPECT_EQ(dc.lineage[0].cover, 1u);
}

TEST(AssignActions, SingleSelectedSet) {
  const auto inst = instance(4, {{0, 1, 2, 3}});
  const std::uint32_t sel[1] = {0};
  const auto dc = assign_actions(inst, sel);
  EXPECT_EQ(dc.assignment, (std::vector<Label>(4, 0)));
}

TEST(AssignActions, UncoveredActionIsAnError) {
  const auto inst = instance(4, {{0, 1}, {2, 3}});
  const std::uint32_t sel[1] = {0};
  EXPECT_THROW(assign_actions(inst, sel), Error);
}

TEST(FootprintOverlap, IdenticalAndDisjoint) {
  const auto same = footprint_overlap(10, 10, 10);
  EXPECT_DOUBLE_EQ(same.iou, 1);
  EXPECT_DOUBLE_EQ(same.area_similarity, 1);
  const auto apart = footprint_overlap(10, 40, 0);
  EXPECT_DOUBLE_EQ(apart.iou, 0);
  EXPECT_DOUBLE_EQ(apart.area_similarity, 0.25);
  EXPECT_DOUBLE_EQ(footprint_overlap(0, 0, 0).iou, 0);
}

TEST(FootprintOverlap, StaysInUnitInterval) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t a = rng() % 50, b = rng() % 50, inter = std::min(a, b) == 0 ? 0 : rng() % (std::min(a, b) + 1);
    const auto o = footprint_overlap(a, b, inter);
    EXPECT_GE(o.iou, 0);
    EXPECT_LE(o.iou, 1);
    EXPECT_GE(o.area_similarity, 0);
    EXPECT_LE(o.area_similarity, 1);
  }
}

TEST(MergeCovers, DisjointFootprintsNeverMerge) {
  using testing_support::make_log;
  // Same player paints two far-apart pixels: identical embeddings, no overlap.
  const auto log = make_log(10, 1, {{0, 0, 3, 0, 0}, {9, 0, 3, 1, 0}});
  const auto inst = instance(2, {{0}, {1}});
  EmbeddingMatrix players(1, 2);
  players.row(0)[0] = 1;
  const std::uint32_t sel[2] = {0, 1};
  const auto dc = merge_covers(assign_actions(inst, sel), inst, log, players, {});
  EXPECT_EQ(dc.cluster_count, 2u);
}

TEST(MergeCovers, SameFootprintMergesTransitively) {
  using testing_support::make_log;
  // Three covers of the same two pixels at different snapshots.
  const auto log = make_log(4, 1, {{0, 0, 3, 0, 0}, {1, 0, 3, 1, 1}, {0, 0, 4, 2, 2}, {1, 0, 4, 3, 3},
                                   {0, 0, 5, 4, 4}, {1, 0, 5, 5, 5}});
  const auto inst = instance(6, {{0, 1}, {2, 3}, {4, 5}});
  EmbeddingMatrix players(6, 2);
  for (std::size_t p = 0; p < 6; ++p) players.row(p)[p % 2] = 1;
  const std::uint32_t sel[3] = {0, 1, 2};
  const auto dc = merge_covers(assign_actions(inst, sel), inst, log, players, {});
  EXPECT_EQ(dc.cluster_count, 1u);
  for (const auto& rec : dc.lineage) EXPECT_EQ(rec.rule, MergeRule::iou_area);
}

TEST(MergeCovers, RejectsOutOfRangeThresholds) {
  const auto log = testing_support::make_log(2, 1, {{0, 0, 3, 0, 0}});
  const auto inst = instance(1, {{0}});
  const std::uint32_t sel[1] = {0};
  MergeParams bad;
  bad.alpha_iou = 1.5;
  EXPECT_THROW(merge_covers(assign_actions(inst, sel), inst, log, EmbeddingMatrix(1, 2), bad), Error);
}

TEST(SnapshotSchedule, CadenceAndEnd) {
  EXPECT_EQ(snapshot_schedule(250, 100), (std::vector<std::int64_t>{100, 200, 250}));
  EXPECT_EQ(snapshot_schedule(200, 100), (std::vector<std::int64_t>{100, 200}));
  EXPECT_EQ(snapshot_schedule(50, 100), (std::vector<std::int64_t>{50}));
  EXPECT_THROW(snapshot_schedule(50, 0), Error);
}

TEST(DynamicClustering, TwoTeamsRecoverPlantedLabels) {
  const auto p = run_fixture("two_teams.json");
  const auto got = Partition::from_labels(p.result.clustering.assignment);
  EXPECT_GE(ars(got, truth_partition(p.game)), 0.99);
  EXPECT_EQ(p.result.clustering.cluster_count, 2u);
}

TEST(DynamicClustering, MergingOnlyCoarsensAndHelps) {
  const auto p = run_fixture("layered.json");
  const auto& r = p.result;
  const auto before = assign_actions(r.instance, r.clustering.selected);
  const auto truth = truth_partition(p.game);
  const double ars_before = ars(Partition::from_labels(before.assignment), truth);
  const double ars_after = ars(Partition::from_labels(r.clustering.assignment), truth);
  EXPECT_GE(ars_after, ars_before);
  EXPECT_LE(r.clustering.cluster_count, before.cluster_count);

  // Coarsening: actions sharing a cover before the merge share a cluster after it.
  std::vector<std::size_t> sizes_before(before.cluster_count, 0), sizes_after(r.clustering.cluster_count, 0);
  for (std::size_t a = 0; a < before.assignment.size(); ++a) {
    EXPECT_EQ(r.clustering.assignment[a], r.clustering.cluster_of_cover[std::size_t(before.assignment[a])]);
    ++sizes_before[std::size_t(before.assignment[a])];
    ++sizes_after[std::size_t(r.clustering.assignment[a])];
  }
  for (std::size_t c = 0; c < before.cluster_count; ++c)
    EXPECT_GE(sizes_after[std::size_t(r.clustering.cluster_of_cover[c])], sizes_before[c]);

  // The flag layers painted before and after the attack share one cluster.
  const std::int64_t attack_lo = 4 * kMsPerHour, attack_hi = 6 * kMsPerHour;
  std::map<Label, std::size_t> before_attack, after_attack;
  for (std::size_t a = 0; a < p.game.truth.size(); ++a) {
    if (p.game.truth[a] != 0) continue;
    if (p.game.log.time[a] < attack_lo) ++before_attack[r.clustering.assignment[a]];
    if (p.game.log.time[a] >= attack_hi) ++after_attack[r.clustering.assignment[a]];
  }
  auto modal = [](const std::map<Label, std::size_t>& m) {
    return std::max_element(m.begin(), m.end(), [](auto& a, auto& b) { return a.second < b.second; });
  };
  ASSERT_FALSE(before_attack.empty());
  ASSERT_FALSE(after_attack.empty());
  EXPECT_EQ(modal(before_attack)->first, modal(after_attack)->first);
  std::size_t n_before = 0;
  for (auto [c, n] : before_attack) n_before += n;
  EXPECT_GE(double(modal(before_attack)->second) / double(n_before), 0.95);
}

TEST(DynamicClustering, EveryActionAssignedOnce) {
  const auto p = run_fixture("two_teams.json");
  const auto& dc = p.result.clustering;
  ASSERT_EQ(dc.assignment.size(), p.game.log.size());
  for (Label l : dc.assignment) {
    EXPECT_GE(l, 0);
    EXPECT_LT(std::size_t(l), dc.cluster_count);
  }
  EXPECT_EQ(dc.lineage.size(), dc.selected.size());
}
