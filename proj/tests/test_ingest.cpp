#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace placelab;
using testing_support::make_log;
using testing_support::scratch_dir;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(ParseDump, SortsRowsByTime) {
  const auto dir = scratch_dir("ingest_sort");
  const auto dump = write_file(dir, "dump.csv",
                               "ts,user_hash,x_coordinate,y_coordinate,color\n"
                               "2017-03-31 00:00:09.000 UTC,bob,3,4,5\n"
                               "2017-03-31 00:00:01.500 UTC,alice,1,1,2\n"
                               "2017-03-31 00:00:05 UTC,carol,7,8,15\n");
  const auto r = parse_dump(dump, Edition::y2017);
  ASSERT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.report.malformed, 0u);
  EXPECT_EQ(r.log.time, (std::vector<std::int64_t>{0, 3500, 7500}));
  EXPECT_EQ(r.log.x[0], 1);
  EXPECT_EQ(r.log.color[2], 5);
  EXPECT_EQ(r.log.player_count(), 3u);
  r.log.validate();
}

TEST(ParseDump, CountsOutOfPaletteColorAsMalformed) {
  const auto dir = scratch_dir("ingest_malformed");
  std::string text = "ts,user_hash,x_coordinate,y_coordinate,color\n";
  for (int i = 0; i < 1500; ++i)
    text += "2017-03-31 00:00:00." + std::to_string(100 + i % 800) + " UTC,u" + std::to_string(i % 40) + "," +
            std::to_string(i % 1000) + "," + std::to_string(i / 3) + "," + std::to_string(i % 16) + "\n";
  text += "2017-03-31 00:00:02 UTC,mallory,5,5,99\n";
  const auto r = parse_dump(write_file(dir, "dump.csv", text), Edition::y2017);
  EXPECT_EQ(r.report.rows, 1501u);
  EXPECT_EQ(r.report.malformed, 1u);
  EXPECT_EQ(r.log.size(), 1500u);
  ASSERT_FALSE(r.report.samples.empty());
  EXPECT_NE(r.report.samples[0].find("palette"), std::string::npos);
}

TEST(ParseDump, TooManyMalformedRowsAbort) {
  const auto dir = scratch_dir("ingest_abort");
  const auto dump = write_file(dir, "dump.csv",
                               "ts,user_hash,x_coordinate,y_coordinate,color\n"
                               "2017-03-31 00:00:01 UTC,a,1,1,2\n"
                               "not a time,b,1,1,2\n");
  try {
    parse_dump(dump, Edition::y2017);
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(ParseDump, ModernSchemaHexColorsAndRectangles) {
  const auto dir = scratch_dir("ingest_modern");
  const auto dump = write_file(dir, "dump.csv",
                               "timestamp,user_id,pixel_color,coordinate\n"
                               "2022-04-01 12:44:10.315 UTC,u1,#FF4500,\"42,42\"\n"
                               "2022-04-01 12:44:12 UTC,u2,#000000,\"{X1: 10, Y1: 20, X2: 30, Y2: 40}\"\n"
                               "2022-04-01 12:44:13 UTC,u1,#FFFFFF,\"{X: 7, Y: 9, R: 3}\"\n");
  const auto r = parse_dump(dump, Edition::y2022);
  ASSERT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.log.x[1], 10);
  EXPECT_EQ(r.log.y[1], 20);
  EXPECT_EQ(r.log.x[2], 7);
  EXPECT_EQ(r.log.color[0], 2);  // #FF4500 is the third modern colour
  EXPECT_EQ(r.log.player_count(), 2u);
}

TEST(WhiteoutFilter, LogWithoutWhiteoutIsUnchanged) {
  const auto log = make_log(4, 4, {{0, 0, 1, 0, 0}, {1, 1, 2, 10, 1}});
  EXPECT_EQ(filter_whiteout(log), log);
}

TEST(WhiteoutFilter, DropsActionsFromCutoff) {
  std::vector<Action> acts;
  for (int i = 0; i < 10; ++i) acts.push_back({i % 4, i / 4, std::uint8_t(1 + i % 3), i * 10, PlayerId(i % 3)});
  auto log = make_log(4, 4, acts);
  log.config.whiteout_start_ms = 60;
  const auto out = filter_whiteout(log);
  EXPECT_EQ(out.size(), 6u);
  EXPECT_EQ(out.config.analysis_end(), 60);
  EXPECT_LT(out.size(), log.size());
  out.validate();
}

TEST(Canvas, EmptyAtTimeZeroBeforeAnyAction) {
  const auto log = make_log(5, 3, {{1, 1, 4, 5, 0}});
  const Canvas c = canvas_at(log, 0);
  EXPECT_EQ(c.width(), 5);
  EXPECT_EQ(c.height(), 3);
  for (std::size_t k = 0; k < c.top.size(); ++k) {
    EXPECT_EQ(c.top[k], kNoAction);
    EXPECT_EQ(c.color[k], log.config.background_color);
  }
}

TEST(Canvas, LastWriterWins) {
  const auto log = make_log(3, 3, {{1, 1, 4, 5, 0}, {1, 1, 9, 9, 1}});
  EXPECT_EQ(canvas_at(log, 7).color[4], 4);
  EXPECT_EQ(canvas_at(log, 9).color[4], 9);
  EXPECT_EQ(canvas_at(log, 9).top[4], 1u);
}

TEST(Canvas, ExpansionsCropTheSnapshot) {
  auto log = make_log(4, 4, {{0, 0, 1, 0, 0}, {3, 3, 2, 50, 0}});
  log.config.expansions = {{0, 2, 2, 0, 0}, {40, 4, 4, 0, 0}};
  log.validate();
  EXPECT_EQ(canvas_at(log, 10).top.size(), 4u);
  EXPECT_EQ(canvas_at(log, 50).top.size(), 16u);
}

TEST(Canvas, ReplayMatchesIndependentSnapshots) {
  std::mt19937_64 rng(3);
  std::vector<Action> acts;
  for (int i = 0; i < 300; ++i)
    acts.push_back({int(rng() % 6), int(rng() % 5), std::uint8_t(rng() % 16), std::int64_t(rng() % 1000),
                    PlayerId(rng() % 9)});
  const auto log = make_log(6, 5, acts);
  CanvasReplay replay(log);
  while (!replay.done()) {
    replay.apply_next();
    const std::size_t i = replay.next_index() - 1;
    // Only compare once every action sharing this timestamp has been applied.
    if (i + 1 < log.size() && log.time[i + 1] == log.time[i]) continue;
    const Canvas direct = canvas_at(log, log.time[i]);
    ASSERT_EQ(replay.snapshot(log.time[i]).top, direct.top);
  }
}

TEST(Cache, RoundTripIsIdentical) {
  std::vector<Action> acts;
  for (int i = 0; i < 50; ++i) acts.push_back({i % 7, i % 5, std::uint8_t(i % 16), i * 3, PlayerId(i % 4)});
  const auto log = make_log(7, 5, acts);
  const auto dir = scratch_dir("cache_roundtrip");
  const auto m1 = write_cache(log, dir);
  const auto back = read_cache(dir);
  EXPECT_EQ(back, log);
  const auto again = scratch_dir("cache_roundtrip2");
  const auto m2 = write_cache(back, again);
  EXPECT_EQ(m1.at("checksum"), m2.at("checksum"));
}

TEST(Cache, CorruptColumnIsRejected) {
  const auto log = make_log(3, 3, {{0, 0, 1, 0, 0}, {1, 1, 2, 1, 1}});
  const auto dir = scratch_dir("cache_corrupt");
  write_cache(log, dir);
  {
    std::fstream f(dir / "color.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.put(char(7));
  }
  EXPECT_THROW(read_cache(dir), Error);
}

TEST(ActionLog, PerPlayerCountsSumToTotal) {
  std::mt19937_64 rng(9);
  std::vector<Action> acts;
  for (int i = 0; i < 500; ++i)
    acts.push_back({int(rng() % 10), int(rng() % 10), std::uint8_t(rng() % 16), std::int64_t(i), PlayerId(rng() % 37)});
  const auto log = make_log(10, 10, acts);
  std::vector<std::size_t> per(log.player_count(), 0);
  for (auto p : log.player) ++per[p];
  EXPECT_EQ(std::accumulate(per.begin(), per.end(), std::size_t{0}), log.size());
}

TEST(GameConfig, RejectsPaletteThatDoesNotExtend) {
  GameConfig c = default_config(Edition::y2022);
  c.palettes[1].colors[0] = Rgb{1, 2, 3};
  EXPECT_THROW(c.validate(), Error);
}

TEST(GameConfig, JsonRoundTrip) {
  const GameConfig c = default_config(Edition::y2023);
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}
