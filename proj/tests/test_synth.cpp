#include <gtest/gtest.h>

#include "support.hpp"

using namespace placelab;

namespace {

synth::Scenario solo(double redundancy) {
  synth::Scenario s;
  s.width = 40;
  s.height = 40;
  s.duration_h = 8;
  s.seed = 5;
  synth::ArtworkSpec a;
  a.name = "solo";
  a.kind = "checker";
  a.colors = {3, 11};
  a.cell = 4;
  a.x = 10;
  a.y = 10;
  a.width = 20;
  a.height = 20;
  a.team_size = 10;
  a.join_h = 0.5;
  a.redundancy = redundancy;
  s.artworks.push_back(a);
  return s;
}

}  // namespace

TEST(Synth, RespectsPlayerCooldown) {
  const auto g = synth::generate(synth::load_scenario(testing_support::fixture("e2e_200.json")));
  std::vector<std::int64_t> last(g.log.player_count(), -1);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < g.log.size(); ++i) {
    auto& prev = last[g.log.player[i]];
    if (prev >= 0 && g.log.time[i] - prev < synth::kCooldownMs) ++violations;
    prev = g.log.time[i];
  }
  EXPECT_EQ(violations, 0u);
  g.log.validate();
}

TEST(Synth, SameSeedSameLog) {
  const auto s = synth::load_scenario(testing_support::fixture("two_teams.json"));
  const auto a = synth::generate(s), b = synth::generate(s);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.truth, b.truth);
  const auto da = testing_support::scratch_dir("same_seed_a"), db = testing_support::scratch_dir("same_seed_b");
  EXPECT_EQ(write_cache(a.log, da).at("checksum"), write_cache(b.log, db).at("checksum"));
  auto other = s;
  other.seed += 1;
  EXPECT_NE(synth::generate(other).log, a.log);
}

TEST(Synth, TruthIsAPartitionOfTheLog) {
  const auto g = synth::generate(synth::load_scenario(testing_support::fixture("growth.json")));
  ASSERT_EQ(g.truth.size(), g.log.size());
  std::size_t noise = 0;
  for (Label l : g.truth) {
    EXPECT_GE(l, kNullLabel);
    EXPECT_LT(l, Label(g.oracle.size()));
    noise += l == kNullLabel;
  }
  EXPECT_GT(noise, 0u);
  EXPECT_EQ(g.atlas.size(), g.oracle.size());
}

TEST(Synth, SingleArtworkWithoutRedundancy) {
  const auto g = synth::generate(solo(0));
  for (Label l : g.truth) EXPECT_EQ(l, 0);
  ASSERT_EQ(g.oracle.size(), 1u);
  const auto& o = g.oracle[0];
  EXPECT_EQ(o.wasted, 0u);
  EXPECT_TRUE(o.successful);
  EXPECT_EQ(o.max_area, 400u);
  EXPECT_EQ(o.final_area, 400u);
  const auto cc = coordination_cost(build_coalitions(g.log, g.truth));
  ASSERT_EQ(cc.points.size(), 1u);
  EXPECT_DOUBLE_EQ(cc.points[0].ratio, 0);
}

TEST(Synth, OracleMatchesMeasuredRedundancy) {
  const auto g = synth::generate(solo(0.2));
  const auto& o = g.oracle[0];
  const auto cc = coordination_cost(build_coalitions(g.log, g.truth));
  ASSERT_EQ(cc.points.size(), 1u);
  EXPECT_NEAR(cc.points[0].ratio, double(o.wasted) / double(o.team_actions), 1e-12);
  EXPECT_NEAR(cc.points[0].ratio, 0.2, 0.05);
}

TEST(Synth, FullErasureIsUnsuccessful) {
  auto s = solo(0);
  s.artworks[0].erase = synth::Erasure{3, 40};
  const auto g = synth::generate(s);
  const auto& o = g.oracle[0];
  EXPECT_FALSE(o.successful);
  EXPECT_LT(10.0 * double(o.final_area), 4.0 * double(o.max_area));
  EXPECT_EQ(o.successful, retains_area(o.final_area, o.max_area));
}

TEST(Synth, RejectsTemplateOutsideCanvas) {
  auto s = solo(0);
  s.artworks[0].width = 45;
  EXPECT_THROW(synth::generate(s), Error);
  auto t = solo(0);
  t.artworks[0].colors = {99};
  EXPECT_THROW(synth::generate(t), Error);
}

TEST(Synth, ScenarioJsonErrors) {
  EXPECT_THROW(synth::scenario_from_json(nlohmann::json::parse(R"({"width": 5})")), Error);
  EXPECT_THROW(synth::load_scenario(testing_support::fixture("absent.json")), Error);
}

TEST(Synth, TextTemplateUsesBothColors) {
  synth::ArtworkSpec a;
  a.kind = "text";
  a.text = "HI";
  a.colors = {12, 1};
  a.cell = 2;
  a.width = 30;
  a.height = 18;
  const auto t = synth::make_template(a);
  ASSERT_EQ(t.color.size(), 30u * 18u);
  const auto ink = std::count(t.color.begin(), t.color.end(), std::uint8_t{1});
  EXPECT_GT(ink, 0);
  EXPECT_GT(std::count(t.color.begin(), t.color.end(), std::uint8_t{12}), ink);
}
