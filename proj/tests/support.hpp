#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "placelab/placelab.hpp"

namespace testing_support {

using namespace placelab;

/// Fixed-size canvas with the 16-colour palette and no expansions.
inline GameConfig small_config(int width, int height, std::int64_t duration_ms) {
  GameConfig c = default_config(Edition::synthetic);
  c.expansions = {{0, width, height, 0, 0}};
  c.duration_ms = duration_ms;
  return c;
}

/// Builds a finalized log from hand-written actions (player ids are opaque).
inline ActionLog make_log(int width, int height, const std::vector<Action>& actions, std::int64_t duration_ms = 0) {
  ActionLog log;
  std::int64_t end = duration_ms;
  PlayerId max_player = 0;
  for (const auto& a : actions) {
    log.push_back(a);
    end = std::max(end, a.time + 1);
    max_player = std::max(max_player, a.player);
  }
  log.player_ids.resize(std::size_t(max_player) + 1);
  for (std::size_t i = 0; i < log.player_ids.size(); ++i) log.player_ids[i] = 1000 + i;
  log.config = small_config(width, height, end);
  // Stable sort and compaction without shifting times.
  std::vector<std::size_t> order(log.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return log.time[a] < log.time[b]; });
  ActionLog sorted;
  sorted.config = log.config;
  sorted.player_ids = log.player_ids;
  for (auto i : order) sorted.push_back(log[i]);
  compact_players(sorted);
  return sorted;
}

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(PLACELAB_FIXTURE_DIR) / name;
}

/// Per-test scratch directory under the build tree, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::path(PLACELAB_SCRATCH_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Partition partition_of(const std::vector<int>& labels) {
  Partition p;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    p.items.push_back(ItemId(i));
    p.labels.push_back(Label(labels[i]));
  }
  return p;
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<int> out(n);
  for (auto& v : out) v = pick(rng);
  return out;
}

/// Examples on a 0.01 grid whose label is start_time <= cut; other features are noise.
inline std::vector<SuccessExample> planted_examples(std::mt19937_64& rng, std::size_t n, double cut) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<SuccessExample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& ex = out[i];
    ex.cluster = Label(i);
    ex.start_time = double(rng() % 100) / 100;
    ex.artwork_size = 1 + 1000 * u(rng);
    ex.coalition_size = 1 + 50 * u(rng);
    ex.color_entropy = 4 * u(rng);
    ex.successful = ex.start_time <= cut;
  }
  return out;
}

/// Features and labels drawn independently.
inline std::vector<SuccessExample> noise_examples(std::mt19937_64& rng, std::size_t n) {
  auto out = planted_examples(rng, n, 0.5);
  for (auto& ex : out) ex.successful = rng() % 2 == 0;
  return out;
}

}  // namespace testing_support
