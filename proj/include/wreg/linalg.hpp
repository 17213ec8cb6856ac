#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wreg/error.hpp"

namespace wreg {

/// Multivariate normal N(mu, sigma). Unit of both HMM states and templates.
struct GaussianComponent {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;

  Eigen::Index dim() const { return mu.size(); }
};

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& s) {
  return 0.5 * (s + s.transpose());
}

/// Column means of an n x d sample matrix.
inline Eigen::VectorXd column_mean(const Eigen::MatrixXd& x) {
  return x.colwise().mean().transpose();
}

/// Unbiased (n-1) sample covariance of the rows of `x`.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw NumericalError("sample covariance needs at least 2 rows");
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return symmetrized(c.transpose() * c / static_cast<double>(x.rows() - 1));
}

/// Principal square root of a symmetric PSD matrix via symmetric
/// eigendecomposition. Eigenvalues in [-1e-10 * max(1, |lambda_max|), 0) are
/// clamped to zero; anything more negative is rejected.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols()) throw std::invalid_argument("sqrtm_psd: matrix not square");
  if (!s.allFinite()) throw std::invalid_argument("sqrtm_psd: non-finite entries");
  if (s.size() == 0) return s;
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("sqrtm_psd: matrix not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(s));
  if (es.info() != Eigen::Success) throw NumericalError("sqrtm_psd: eigensolver failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double floor = -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < floor) throw std::invalid_argument("sqrtm_psd: matrix not PSD");
  const Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& v = es.eigenvectors();
  return symmetrized(v * root.asDiagonal() * v.transpose());
}

inline double min_eigenvalue(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace wreg
