#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "placelab/core.hpp"
#include "placelab/io.hpp"

namespace placelab {

// ---------------------------------------------------------------------------
// Time series

/// Equally spaced buckets; `start` is the time of bucket 0 (any unit).
struct TimeSeries {
  double start = 0;
  double step = 1;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Two-column CSV (bucket start, count). Buckets missing between the first
/// and last row are filled with zeros; the step is the smallest gap seen.
inline TimeSeries read_time_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open " + path.string());
  std::vector<std::pair<double, double>> rows;
  std::vector<std::string_view> fields;
  std::string line;
  while (std::getline(in, line)) {
    io::split_csv(line, fields);
    if (fields.size() < 2) continue;
    double t = 0, v = 0;
    if (!io::parse_number(io::trim(fields[0]), t) || !io::parse_number(io::trim(fields[1]), v)) {
      if (rows.empty()) continue;  // header
      fail_data("time series: bad row '" + line + "' in " + path.string());
    }
    rows.emplace_back(t, v);
  }
  if (rows.empty()) fail_data("time series: no rows in " + path.string());
  std::sort(rows.begin(), rows.end());
  TimeSeries ts;
  ts.start = rows.front().first;
  double step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].first > rows[i - 1].first) step = std::min(step, rows[i].first - rows[i - 1].first);
  ts.step = std::isfinite(step) ? step : 1.0;
  const auto n = std::size_t(std::llround((rows.back().first - ts.start) / ts.step)) + 1;
  ts.values.assign(n, 0.0);
  for (const auto& [t, v] : rows) {
    const double k = (t - ts.start) / ts.step;
    if (std::abs(k - std::round(k)) > 1e-6) fail_data("time series: bucket times are not equally spaced");
    ts.values[std::size_t(std::llround(k))] += v;
  }
  return ts;
}

inline std::vector<double> difference(std::span<const double> x) {
  std::vector<double> d;
  for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
  return d;
}

// ---------------------------------------------------------------------------
// Granger causality

struct GrangerResult {
  double p_value = 1;
  double f_statistic = 0;
  std::size_t lag = 0;
  std::size_t df1 = 0, df2 = 0;
  std::size_t observations = 0;
};

struct GrangerOptions {
  std::size_t max_lag = 24;
  bool difference = false;
};

namespace detail {

struct OlsFit {
  double rss = 0;
};

/// Residual sum of squares of y_t (t in [first, T)) on an intercept, L own
/// lags and, if `with_x`, L lags of x.
inline OlsFit lagged_ols(std::span<const double> y, std::span<const double> x, std::size_t lag, std::size_t first,
                         bool with_x) {
  const std::size_t n = y.size() - first;
  const std::size_t k = 1 + lag * (with_x ? 2 : 1);
  Eigen::MatrixXd design{Eigen::Index(n), Eigen::Index(k)};
  Eigen::VectorXd target{Eigen::Index(n)};
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t t = first + r;
    const auto row = Eigen::Index(r);
    target(row) = y[t];
    design(row, 0) = 1.0;
    for (std::size_t l = 1; l <= lag; ++l) {
      design(row, Eigen::Index(l)) = y[t - l];
      if (with_x) design(row, Eigen::Index(lag + l)) = x[t - l];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < Eigen::Index(k)) fail_data("granger: singular regression (collinear lags)");
  const Eigen::VectorXd beta = qr.solve(target);
  return {(target - design * beta).squaredNorm()};
}

}  // namespace detail

/// Tests whether x helps predict y. The lag is chosen by AIC of the
/// restricted (own-lag) model over 1..max_lag on a common sample, so the
/// choice never looks at x; the F-test is then run on all rows available
/// for that lag.
inline GrangerResult granger_test(std::span<const double> x_in, std::span<const double> y_in,
                                  const GrangerOptions& opt = {}) {
  if (x_in.size() != y_in.size()) fail_argument("granger: series lengths differ");
  if (opt.max_lag == 0) fail_argument("granger: max_lag must be positive");
  std::vector<double> x(x_in.begin(), x_in.end()), y(y_in.begin(), y_in.end());
  if (opt.difference) {
    x = difference(x);
    y = difference(y);
  }
  const std::size_t T = y.size();
  const std::size_t L_max = opt.max_lag;
  if (T < 2 * L_max || T < 3 * L_max + 2)
    fail_argument("granger: series too short for max_lag " + std::to_string(L_max));
  for (double v : x)
    if (!std::isfinite(v)) fail_data("granger: non-finite value");
  for (double v : y)
    if (!std::isfinite(v)) fail_data("granger: non-finite value");

  std::size_t best_lag = 1;
  double best_aic = std::numeric_limits<double>::infinity();
  const double n_common = double(T - L_max);
  for (std::size_t L = 1; L <= L_max; ++L) {
    const auto fit = detail::lagged_ols(y, x, L, L_max, false);
    const double aic = n_common * std::log(std::max(fit.rss, 1e-300) / n_common) + 2.0 * double(L + 1);
    if (aic < best_aic) {
      best_aic = aic;
      best_lag = L;
    }
  }
  GrangerResult r;
  r.lag = best_lag;
  r.observations = T - best_lag;
  r.df1 = best_lag;
  r.df2 = r.observations - 2 * best_lag - 1;
  const double rss_u = detail::lagged_ols(y, x, best_lag, best_lag, true).rss;
  const double rss_r = detail::lagged_ols(y, x, best_lag, best_lag, false).rss;
  if (rss_u <= 0) {
    r.f_statistic = rss_r > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.p_value = rss_r > 0 ? 0.0 : 1.0;
    return r;
  }
  r.f_statistic = std::max(0.0, (rss_r - rss_u) / double(r.df1)) / (rss_u / double(r.df2));
  boost::math::fisher_f dist(double(r.df1), double(r.df2));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.f_statistic));
  return r;
}

// ---------------------------------------------------------------------------
// Anomalies

struct AnomalyOptions {
  std::size_t window = 25;
  double threshold = 3.5;
};

inline double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + long(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

/// Robust score per index against a rolling window of `window` values
/// centred on it (shifted inward at the ends). When the window's MAD is 0 a
/// value equal to the median scores 0 and any other value scores +inf.
inline std::vector<double> anomaly_scores(std::span<const double> x, std::size_t window) {
  if (window < 5) fail_argument("anomalies: window must be at least 5");
  if (window > x.size()) fail_argument("anomalies: window longer than the series");
  const std::size_t n = x.size();
  std::vector<double> scores(n), buf, dev;
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t lo = t >= window / 2 ? t - window / 2 : 0;
    lo = std::min(lo, n - window);
    buf.assign(x.begin() + long(lo), x.begin() + long(lo + window));
    const double med = median_of(buf);
    dev.resize(window);
    for (std::size_t i = 0; i < window; ++i) dev[i] = std::abs(x[lo + i] - med);
    const double mad = median_of(dev);
    const double d = std::abs(x[t] - med);
    if (mad > 0) scores[t] = d / (1.4826 * mad);
    else scores[t] = d == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return scores;
}

inline std::vector<std::size_t> detect_anomalies(std::span<const double> x, const AnomalyOptions& opt = {}) {
  const auto s = anomaly_scores(x, opt.window);
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < s.size(); ++t)
    if (s[t] > opt.threshold) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Partition agreement

/// Joint label counts over the items two partitions share, with items that
/// are unlabeled in either partition masked out.
struct Contingency {
  std::map<std::pair<Label, Label>, std::uint64_t> joint;
  std::map<Label, std::uint64_t> rows, cols;
  std::uint64_t total = 0;
};

inline Contingency contingency(const Partition& a, const Partition& b) {
  if (a.items.size() != a.labels.size() || b.items.size() != b.labels.size())
    fail_argument("partition: items and labels differ in length");
  std::unordered_map<ItemId, Label> lb;
  lb.reserve(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) lb.emplace(b.items[i], b.labels[i]);
  Contingency c;
  bool shared = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto it = lb.find(a.items[i]);
    if (it == lb.end()) continue;
    shared = true;
    if (a.labels[i] == kNullLabel || it->second == kNullLabel) continue;
    ++c.joint[{a.labels[i], it->second}];
    ++c.rows[a.labels[i]];
    ++c.cols[it->second];
    ++c.total;
  }
  if (!shared) fail_argument("partitions share no items");
  return c;
}

/// Adjusted Rand index from pair counts. Degenerate cases where the
/// adjustment is 0/0 (both trivial) score 1.
inline double ars(const Partition& a, const Partition& b) {
  const Contingency c = contingency(a, b);
  auto pairs = [](double v) { return v * (v - 1) / 2; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [k, v] : c.joint) index += pairs(double(v));
  for (const auto& [k, v] : c.rows) sum_rows += pairs(double(v));
  for (const auto& [k, v] : c.cols) sum_cols += pairs(double(v));
  const double all = pairs(double(c.total));
  if (all == 0) return 1.0;
  const double expected = sum_rows * sum_cols / all;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Variation of information, natural log unless `base2`. Summed as
/// H(A|B) + H(B|A) over joint cells so that equal partitions give exactly 0.
inline double vi(const Partition& a, const Partition& b, bool base2 = false) {
  const Contingency c = contingency(a, b);
  if (c.total == 0) return 0.0;
  const double n = double(c.total);
  double out = 0;
  for (const auto& [k, v] : c.joint) {
    const double joint = double(v);
    out -= joint / n * (std::log(joint / double(c.rows.at(k.first))) + std::log(joint / double(c.cols.at(k.second))));
  }
  out = std::max(0.0, out);
  return base2 ? out / std::log(2.0) : out;
}

}  // namespace placelab
