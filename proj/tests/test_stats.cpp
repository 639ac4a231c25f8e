#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace placelab;
using testing_support::partition_of;

namespace {

struct Pair {
  std::vector<double> x, y;
};

/// y_t = coupling * x_{t-1} + noise, with x white noise.
Pair coupled(std::mt19937_64& rng, std::size_t n, double coupling) {
  std::normal_distribution<double> z(0, 1);
  Pair p{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t t = 0; t < n; ++t) {
    p.x[t] = z(rng);
    p.y[t] = (t > 0 ? coupling * p.x[t - 1] : 0.0) + z(rng);
  }
  return p;
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> z(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

}  // namespace

TEST(Granger, DetectsLaggedCoupling) {
  std::mt19937_64 rng(11);
  const auto p = coupled(rng, 500, 0.8);
  const auto r = granger_test(p.x, p.y);
  EXPECT_LT(r.p_value, 0.01);
  EXPECT_GE(r.lag, 1u);
  EXPECT_EQ(r.df2, r.observations - 2 * r.lag - 1);
}

TEST(Granger, ResidualsMatchNormalEquations) {
  std::mt19937_64 rng(12);
  const auto p = coupled(rng, 200, 0.5);
  for (std::size_t lag : {1u, 3u, 6u})
    for (bool with_x : {false, true}) {
      std::vector<std::vector<double>> rows;
      std::vector<double> target;
      for (std::size_t t = lag; t < p.y.size(); ++t) {
        std::vector<double> row{1.0};
        for (std::size_t l = 1; l <= lag; ++l) row.push_back(p.y[t - l]);
        if (with_x)
          for (std::size_t l = 1; l <= lag; ++l) row.push_back(p.x[t - l]);
        rows.push_back(row);
        target.push_back(p.y[t]);
      }
      const double expected = oracle::normal_equation_rss(rows, target);
      EXPECT_NEAR(detail::lagged_ols(p.y, p.x, lag, lag, with_x).rss, expected, 1e-8 * expected);
    }
}

TEST(Granger, NominalSizeUnderTheNull) {
  std::mt19937_64 rng(13);
  std::vector<double> pvals;
  for (int rep = 0; rep < 200; ++rep) {
    const auto x = gaussian(rng, 300), y = gaussian(rng, 300);
    pvals.push_back(granger_test(x, y).p_value);
  }
  const double rejected = double(std::count_if(pvals.begin(), pvals.end(), [](double p) { return p < 0.05; }));
  EXPECT_NEAR(rejected / 200, 0.05, 0.03);
  // Kolmogorov-Smirnov distance of the p-values from uniform.
  std::sort(pvals.begin(), pvals.end());
  double ks = 0;
  for (std::size_t i = 0; i < pvals.size(); ++i) {
    const double n = double(pvals.size());
    ks = std::max({ks, double(i + 1) / n - pvals[i], pvals[i] - double(i) / n});
  }
  EXPECT_LT(ks, 0.12);
}

TEST(Granger, RejectsDegenerateInput) {
  std::mt19937_64 rng(14);
  const auto y = gaussian(rng, 200);
  const std::vector<double> flat(200, 3.0);
  EXPECT_THROW(granger_test(flat, y), Error);
  EXPECT_THROW(granger_test(std::vector<double>(10, 1.0), std::vector<double>(10, 2.0)), Error);
  EXPECT_THROW(granger_test(y, std::vector<double>(199, 0.0)), Error);
  GrangerOptions no_lag;
  no_lag.max_lag = 0;
  EXPECT_THROW(granger_test(y, y, no_lag), Error);
}

TEST(Granger, DifferencingShortensTheSeries) {
  std::mt19937_64 rng(15);
  const auto p = coupled(rng, 300, 0.8);
  GrangerOptions opt;
  opt.difference = true;
  opt.max_lag = 5;
  const auto r = granger_test(p.x, p.y, opt);
  EXPECT_EQ(r.observations, 299 - r.lag);
  EXPECT_EQ(difference(std::vector<double>{1, 4, 9}), (std::vector<double>{3, 5}));
}

TEST(Anomalies, ConstantSeriesHasNone) {
  EXPECT_TRUE(detect_anomalies(std::vector<double>(100, 7.0)).empty());
}

TEST(Anomalies, SingleSpikeIsFlagged) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(9, 11);
  std::vector<double> v(200);
  for (auto& x : v) x = u(rng);
  v[120] = 100;
  EXPECT_EQ(detect_anomalies(v), (std::vector<std::size_t>{120}));
}

TEST(Anomalies, GaussianNoiseRarelyFlagged) {
  std::mt19937_64 rng(17);
  std::size_t flagged = 0, total = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto v = gaussian(rng, 500);
    flagged += detect_anomalies(v).size();
    total += v.size();
  }
  EXPECT_LT(double(flagged) / double(total), 0.01);
}

TEST(Anomalies, InvariantUnderAffineMaps) {
  std::mt19937_64 rng(18);
  auto v = gaussian(rng, 300);
  v[50] += 9;
  auto w = v;
  for (auto& x : w) x = 4.5 * x - 30;
  const auto a = anomaly_scores(v, 25), b = anomaly_scores(w, 25);
  for (std::size_t t = 0; t < v.size(); ++t) EXPECT_NEAR(a[t], b[t], 1e-9 * std::max(1.0, a[t]));
  EXPECT_EQ(detect_anomalies(v), detect_anomalies(w));
}

TEST(Anomalies, WindowIsValidated) {
  EXPECT_THROW(anomaly_scores(std::vector<double>(10, 1.0), 4), Error);
  EXPECT_THROW(anomaly_scores(std::vector<double>(10, 1.0), 11), Error);
}

TEST(Agreement, IdenticalPartitions) {
  const auto p = partition_of({0, 0, 1, 1, 2});
  EXPECT_DOUBLE_EQ(ars(p, p), 1);
  EXPECT_DOUBLE_EQ(vi(p, p), 0);
}

TEST(Agreement, HandEnumeratedPairs) {
  const std::vector<std::vector<int>> a{{0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2, 2, 3, 3, 3}};
  const std::vector<std::vector<int>> b{{0, 0, 1, 1, 2, 2}, {1, 1, 1, 0, 0, 2, 2, 2, 3, 0}};
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_NEAR(ars(partition_of(a[k]), partition_of(b[k])), oracle::pair_enumeration_ari(a[k], b[k]), 1e-9);
    EXPECT_NEAR(vi(partition_of(a[k]), partition_of(b[k])), oracle::entropy_vi(a[k], b[k]), 1e-9);
  }
}

TEST(Agreement, RandomPartitionsMatchOracles) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    const auto a = testing_support::random_labels(rng, n, 1 + int(rng() % 5));
    const auto b = testing_support::random_labels(rng, n, 1 + int(rng() % 5));
    const double expected = oracle::pair_enumeration_ari(a, b);
    const double got = ars(partition_of(a), partition_of(b));
    if (std::isfinite(expected)) {
      EXPECT_NEAR(got, expected, 1e-9);
    }
    EXPECT_GE(got, -1);
    EXPECT_LE(got, 1);
    EXPECT_NEAR(vi(partition_of(a), partition_of(b)), oracle::entropy_vi(a, b), 1e-9);
  }
}

TEST(Agreement, InvariantUnderRelabelling) {
  std::mt19937_64 rng(20);
  const auto a = testing_support::random_labels(rng, 60, 4);
  const auto b = testing_support::random_labels(rng, 60, 3);
  std::vector<int> renamed(b);
  for (auto& v : renamed) v = 10 - 3 * v;
  EXPECT_DOUBLE_EQ(ars(partition_of(a), partition_of(b)), ars(partition_of(a), partition_of(renamed)));
  EXPECT_DOUBLE_EQ(vi(partition_of(a), partition_of(b)), vi(partition_of(a), partition_of(renamed)));
  // Permuting the items of both partitions together changes nothing either.
  Partition pa = partition_of(a), pb = partition_of(b);
  std::vector<std::size_t> perm(60);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Partition qa, qb;
  for (auto i : perm) {
    qa.items.push_back(pa.items[i]);
    qa.labels.push_back(pa.labels[i]);
  }
  std::reverse(perm.begin(), perm.end());
  for (auto i : perm) {
    qb.items.push_back(pb.items[i]);
    qb.labels.push_back(pb.labels[i]);
  }
  EXPECT_NEAR(ars(qa, qb), ars(pa, pb), 1e-12);
}

TEST(Agreement, IndependentBinaryPartitions) {
  std::mt19937_64 rng(21);
  const auto a = testing_support::random_labels(rng, 10000, 2);
  const auto b = testing_support::random_labels(rng, 10000, 2);
  EXPECT_NEAR(vi(partition_of(a), partition_of(b)), 2 * std::log(2.0), 0.05);
  EXPECT_NEAR(vi(partition_of(a), partition_of(b), true), 2, 0.05 / std::log(2.0));
  EXPECT_NEAR(ars(partition_of(a), partition_of(b)), 0, 0.01);
}

TEST(Agreement, VariationOfInformationIsAMetric) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng() % 50;
    const auto a = partition_of(testing_support::random_labels(rng, n, 4));
    const auto b = partition_of(testing_support::random_labels(rng, n, 3));
    const auto c = partition_of(testing_support::random_labels(rng, n, 5));
    EXPECT_NEAR(vi(a, b), vi(b, a), 1e-12);
    EXPECT_LE(vi(a, c), vi(a, b) + vi(b, c) + 1e-12);
  }
}

TEST(Agreement, NullLabelsAreMasked) {
  const auto a = partition_of({0, 0, 1, 1, -1, -1});
  const auto b = partition_of({0, 0, 1, 1, 0, 1});
  EXPECT_DOUBLE_EQ(ars(a, b), 1);
  EXPECT_DOUBLE_EQ(vi(a, b), 0);
}

TEST(TimeSeriesCsv, MissingBucketsAreZero) {
  const auto dir = testing_support::scratch_dir("series");
  std::ofstream(dir / "s.csv") << "hour,count\n0,5\n2,7\n3,1\n";
  const auto ts = read_time_series(dir / "s.csv");
  EXPECT_DOUBLE_EQ(ts.step, 1);
  EXPECT_EQ(ts.values, (std::vector<double>{5, 0, 7, 1}));
  std::ofstream(dir / "bad.csv") << "hour,count\n0,5\n1,x\n";
  EXPECT_THROW(read_time_series(dir / "bad.csv"), Error);
  EXPECT_THROW(read_time_series(dir / "absent.csv"), Error);
}
