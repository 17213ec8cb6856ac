#pragma once

// Regime-switching synthetic markets with ground-truth labels.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wreg/data.hpp"
#include "wreg/error.hpp"
#include "wreg/hmm.hpp"
#include "wreg/linalg.hpp"

namespace wreg {

struct RegimeSpec {
  std::vector<std::string> assets;
  std::vector<Eigen::VectorXd> means;        // daily log-return means, one per regime
  std::vector<Eigen::MatrixXd> covariances;  // daily covariances, one per regime
  Eigen::MatrixXd transition;                // row-stochastic
  int initial_state = 0;
  Date start_date{2010, 1, 4};

  int regimes() const { return static_cast<int>(means.size()); }

  void validate() const {
    const auto N = static_cast<Eigen::Index>(assets.size());
    const auto K = static_cast<Eigen::Index>(means.size());
    if (N < 1) throw ConfigError("regime spec: no assets");
    if (K < 1 || static_cast<Eigen::Index>(covariances.size()) != K)
      throw ConfigError("regime spec: need one mean and one covariance per regime");
    if (transition.rows() != K || transition.cols() != K)
      throw ConfigError("regime spec: transition matrix must be K x K");
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto& m = means[static_cast<std::size_t>(k)];
      const auto& c = covariances[static_cast<std::size_t>(k)];
      if (m.size() != N || c.rows() != N || c.cols() != N)
        throw ConfigError("regime spec: regime " + std::to_string(k) + " has wrong dimensions");
      if (!m.allFinite() || !c.allFinite())
        throw ConfigError("regime spec: non-finite parameters");
      if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
          (c.size() > 0 && min_eigenvalue(c) < -1e-12))
        throw ConfigError("regime spec: covariance " + std::to_string(k) + " not PSD");
      if ((transition.row(k).array() < 0.0).any() ||
          std::abs(transition.row(k).sum() - 1.0) > 1e-10)
        throw ConfigError("regime spec: transition row " + std::to_string(k) +
                          " not stochastic");
    }
    if (initial_state < 0 || initial_state >= K)
      throw ConfigError("regime spec: initial_state out of range");
  }
};

struct SyntheticMarket {
  PriceTable prices;             // T rows, first price 100
  Eigen::MatrixXd returns;       // (T-1) x N sampled log returns
  std::vector<int> labels;       // regime of each return row
};

/// Samples a T-day market on consecutive business days. Deterministic per seed.
inline SyntheticMarket generate(const RegimeSpec& spec, int T, std::uint64_t seed) {
  spec.validate();
  if (T < 2) throw ConfigError("generate: T must be >= 2");
  const auto N = static_cast<Eigen::Index>(spec.assets.size());
  std::vector<Eigen::MatrixXd> roots;
  for (const auto& c : spec.covariances) roots.push_back(sqrtm_psd(c));

  std::mt19937_64 gen(seed);
  detail::SplitMix chain(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;

  SyntheticMarket m;
  m.returns.resize(T - 1, N);
  int state = spec.initial_state;
  for (int t = 0; t < T - 1; ++t) {
    if (t > 0) {
      const double u = chain.uniform();
      double acc = 0.0;
      int next = spec.regimes() - 1;
      for (int j = 0; j < spec.regimes(); ++j) {
        acc += spec.transition(state, j);
        if (u < acc) {
          next = j;
          break;
        }
      }
      state = next;
    }
    m.labels.push_back(state);
    Eigen::VectorXd z(N);
    for (Eigen::Index j = 0; j < N; ++j) z(j) = normal(gen);
    m.returns.row(t) = (spec.means[static_cast<std::size_t>(state)] +
                        roots[static_cast<std::size_t>(state)] * z)
                           .transpose();
  }

  m.prices.assets = spec.assets;
  m.prices.prices.resize(T, N);
  Eigen::RowVectorXd cum = Eigen::RowVectorXd::Zero(N);
  Date d = spec.start_date;
  while (d.is_weekend()) d = d.next_day();
  for (int t = 0; t < T; ++t) {
    if (t > 0) cum += m.returns.row(t - 1);
    m.prices.prices.row(t) = 100.0 * cum.array().exp();
    m.prices.dates.push_back(d);
    do d = d.next_day();
    while (d.is_weekend());
  }
  return m;
}

}  // namespace wreg
