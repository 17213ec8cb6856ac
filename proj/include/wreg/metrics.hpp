#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace wreg {

struct PerfConfig {
  double periods_per_year = 252.0;
  double risk_free = 0.0;  // annualized
};

struct PerfReport {
  std::size_t days = 0;
  double ann_mean = 0.0;
  double ann_vol = 0.0;
  std::optional<double> sharpe;   // absent when volatility is zero
  std::optional<double> sortino;  // absent when there is no downside
  double max_drawdown = 0.0;      // <= 0, on the cumulative log-return path
  double hit_rate = 0.0;
  double cumulative_log_return = 0.0;
};

/// TO_t = 1/2 |w_t - w_{t-1}|_1; row 0 is measured against `initial`.
inline Eigen::VectorXd turnover_series(const Eigen::MatrixXd& weights,
                                       const Eigen::RowVectorXd& initial) {
  Eigen::VectorXd to(weights.rows());
  for (Eigen::Index t = 0; t < weights.rows(); ++t) {
    const Eigen::RowVectorXd prev = t == 0 ? initial : Eigen::RowVectorXd(weights.row(t - 1));
    to(t) = 0.5 * (weights.row(t) - prev).lpNorm<1>();
  }
  return to;
}

/// Turnover with the first row measured against itself (zero).
inline Eigen::VectorXd turnover_series(const Eigen::MatrixXd& weights) {
  if (weights.rows() == 0) return {};
  return turnover_series(weights, weights.row(0));
}

/// Inverse Herfindahl index of each weight row.
inline Eigen::VectorXd neff_series(const Eigen::MatrixXd& weights) {
  return weights.rowwise().squaredNorm().cwiseInverse();
}

/// Most negative excursion of the cumulative sum below its running peak
/// (the path starts at zero).
inline double max_drawdown(const std::vector<double>& r) {
  double cum = 0.0, peak = 0.0, dd = 0.0;
  for (double x : r) {
    cum += x;
    peak = std::max(peak, cum);
    dd = std::min(dd, cum - peak);
  }
  return dd;
}

inline PerfReport perf_metrics(const std::vector<double>& r, const PerfConfig& cfg = {}) {
  if (r.empty()) throw std::invalid_argument("perf_metrics: empty return series");
  const auto n = static_cast<double>(r.size());
  PerfReport p;
  p.days = r.size();
  double sum = 0.0;
  for (double x : r) sum += x;
  const double mean = sum / n;
  double ss = 0.0, down = 0.0, hits = 0.0;
  for (double x : r) {
    ss += (x - mean) * (x - mean);
    down += std::min(x, 0.0) * std::min(x, 0.0);
    hits += x > 0.0 ? 1.0 : 0.0;
  }
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  const double sd = r.size() > 1 && *lo != *hi ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const double root = std::sqrt(cfg.periods_per_year);
  p.ann_mean = mean * cfg.periods_per_year;
  p.ann_vol = sd * root;
  const double excess = p.ann_mean - cfg.risk_free;
  if (p.ann_vol > 0.0) p.sharpe = excess / p.ann_vol;
  const double downside = std::sqrt(down / n) * root;
  if (downside > 0.0) p.sortino = excess / downside;
  p.max_drawdown = max_drawdown(r);
  p.hit_rate = hits / n;
  p.cumulative_log_return = sum;
  return p;
}

struct RegimeAttribution {
  std::map<int, PerfReport> portfolio;                  // label -> report on that label's days
  std::map<int, std::vector<std::optional<double>>> asset_sharpe;  // label -> per-asset Sharpe
};

/// Partitions days by dominant label; "within" drawdowns use the
/// concatenated sub-series of each label. Labels with no days are omitted.
inline RegimeAttribution regime_attribution(const std::vector<int>& labels,
                                            const std::vector<double>& portfolio_returns,
                                            const Eigen::MatrixXd& asset_returns,
                                            const PerfConfig& cfg = {}) {
  if (labels.empty()) throw std::invalid_argument("regime_attribution: no label path");
  if (labels.size() != portfolio_returns.size() ||
      static_cast<Eigen::Index>(labels.size()) != asset_returns.rows())
    throw std::invalid_argument("regime_attribution: series length mismatch");
  std::map<int, std::vector<std::size_t>> days;
  for (std::size_t t = 0; t < labels.size(); ++t) days[labels[t]].push_back(t);

  RegimeAttribution out;
  for (const auto& [g, idx] : days) {
    std::vector<double> port;
    for (auto t : idx) port.push_back(portfolio_returns[t]);
    out.portfolio[g] = perf_metrics(port, cfg);
    auto& sharpes = out.asset_sharpe[g];
    for (Eigen::Index j = 0; j < asset_returns.cols(); ++j) {
      std::vector<double> a;
      for (auto t : idx) a.push_back(asset_returns(static_cast<Eigen::Index>(t), j));
      sharpes.push_back(perf_metrics(a, cfg).sharpe);
    }
  }
  return out;
}

}  // namespace wreg
