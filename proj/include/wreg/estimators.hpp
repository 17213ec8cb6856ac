#pragma once

// Nearest-neighbour conditional moments and Ledoit-Wolf shrinkage.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "wreg/error.hpp"
#include "wreg/linalg.hpp"

namespace wreg {

struct KnnConfig {
  int neighbors = 50;
  int min_history = 120;  // feature rows required before the first query
  bool standardize = true;

  void validate(int max_feature_window) const {
    if (neighbors < 2) throw ConfigError("knn: neighbors must be >= 2");
    if (min_history < max_feature_window)
      throw ConfigError("knn: min_history must be >= the longest feature window");
  }
};

struct ShrinkageResult {
  Eigen::MatrixXd covariance;
  double rho = 0.0;       // shrinkage intensity in [0, 1]
  double target = 0.0;    // scaled-identity level tr(S)/N
};

/// Ledoit-Wolf (2004) shrinkage toward tr(S)/N * I, with S the 1/n sample
/// covariance of the demeaned rows of `r`.
inline ShrinkageResult ledoit_wolf(const Eigen::MatrixXd& r) {
  const Eigen::Index n = r.rows(), p = r.cols();
  if (n < 2) throw std::invalid_argument("ledoit_wolf: need at least 2 samples");
  if (!r.allFinite()) throw NumericalError("ledoit_wolf: non-finite input");
  const Eigen::MatrixXd x = r.rowwise() - r.colwise().mean();
  const double nn = static_cast<double>(n), pp = static_cast<double>(p);
  const Eigen::MatrixXd s = symmetrized(x.transpose() * x / nn);

  ShrinkageResult out;
  out.target = s.trace() / pp;
  const Eigen::MatrixXd target = out.target * Eigen::MatrixXd::Identity(p, p);
  const double d2 = (s - target).squaredNorm() / pp;
  double b2bar = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::VectorXd xk = x.row(k).transpose();
    b2bar += (xk * xk.transpose() - s).squaredNorm() / pp;
  }
  b2bar /= nn * nn;
  const double b2 = std::min(b2bar, d2);
  out.rho = b2 > 0.0 ? b2 / d2 : 0.0;
  out.covariance = symmetrized(out.rho * target + (1.0 - out.rho) * s);
  return out;
}

/// Per-column mean and standard deviation of the history rows; zero spreads
/// are replaced by one so constant coordinates drop out of the distance.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& hist) {
    Standardizer s;
    s.mean = hist.colwise().mean();
    const Eigen::MatrixXd c = hist.rowwise() - s.mean;
    const double den = static_cast<double>(std::max<Eigen::Index>(1, hist.rows() - 1));
    s.scale = (c.colwise().squaredNorm() / den).cwiseSqrt();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
      if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
    return s;
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
};

struct Neighbors {
  std::vector<Eigen::Index> index;  // rows of the history, nearest first
  std::vector<double> distance;
};

/// Exact K-nearest rows of `hist` to `query` in Euclidean distance; ties go to
/// the more recent (larger) row index. Only rows of `hist` are candidates, so
/// the caller passes strictly earlier rows.
inline Neighbors knn_neighbors(const Eigen::MatrixXd& hist, const Eigen::RowVectorXd& query,
                               int K) {
  if (K < 1 || hist.rows() < K)
    throw std::invalid_argument("knn_neighbors: insufficient history for " + std::to_string(K) +
                                " neighbours");
  if (query.size() != hist.cols()) throw std::invalid_argument("knn_neighbors: dimension mismatch");
  const Eigen::VectorXd d2 = (hist.rowwise() - query).rowwise().squaredNorm();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(hist.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto closer = [&](Eigen::Index a, Eigen::Index b) {
    return d2(a) < d2(b) || (d2(a) == d2(b) && a > b);
  };
  std::partial_sort(idx.begin(), idx.begin() + K, idx.end(), closer);
  Neighbors nb;
  for (int i = 0; i < K; ++i) {
    nb.index.push_back(idx[static_cast<std::size_t>(i)]);
    nb.distance.push_back(std::sqrt(d2(idx[static_cast<std::size_t>(i)])));
  }
  return nb;
}

struct MomentEstimate {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double shrinkage = 0.0;
};

/// Neighbour-average return and Ledoit-Wolf covariance of the neighbour rows
/// of `returns`.
inline MomentEstimate knn_moments(const Eigen::MatrixXd& returns,
                                  const std::vector<Eigen::Index>& neighbors) {
  if (neighbors.size() < 2) throw std::invalid_argument("knn_moments: need >= 2 neighbours");
  Eigen::MatrixXd sample(static_cast<Eigen::Index>(neighbors.size()), returns.cols());
  for (std::size_t i = 0; i < neighbors.size(); ++i)
    sample.row(static_cast<Eigen::Index>(i)) = returns.row(neighbors[i]);
  const auto lw = ledoit_wolf(sample);
  return {column_mean(sample), lw.covariance, lw.rho};
}

}  // namespace wreg
