#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <Eigen/Dense>
#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "wreg/synthgen.hpp"

namespace wreg::fixture {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  return random_matrix(rng, n, 1).col(0);
}

/// B B' with B of size d x rank; rank < d gives a singular PSD matrix.
inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, Eigen::Index d, Eigen::Index rank = -1) {
  const Eigen::MatrixXd b = random_matrix(rng, d, rank < 0 ? d : rank);
  return b * b.transpose();
}

/// Three regimes, three assets, identity-scaled covariances and means a
/// `gap` of daily vols apart; persistence 0.98.
inline RegimeSpec recovery_market(double gap = 10.0, double vol = 0.01) {
  RegimeSpec s;
  s.assets = {"A", "B", "C"};
  Eigen::Vector3d a(1, 0, 0), b(-1, 1, 0), c(0, -1, 1);
  s.means = {a * gap * vol, b * gap * vol, c * gap * vol};
  for (int k = 0; k < 3; ++k) s.covariances.push_back(vol * vol * Eigen::Matrix3d::Identity());
  s.transition = Eigen::MatrixXd::Constant(3, 3, 0.01);
  s.transition.diagonal().setConstant(0.98);
  return s;
}

/// Calm / stress / rotation market on EQ, BOND, GOLD, CASH. Regime 1 is the
/// stress regime: equity mean negative, bond mean positive.
inline RegimeSpec stress_market() {
  RegimeSpec s;
  s.assets = {"EQ", "BOND", "GOLD", "CASH"};
  Eigen::Vector4d calm(0.004, 0.0, 0.0005, 0.0002), stress(-0.012, 0.004, 0.002, 0.0002),
      rotation(0.002, 0.0005, 0.003, 0.0002);
  s.means = {calm, stress, rotation};
  const Eigen::Vector4d v_calm(0.008, 0.004, 0.006, 0.0005), v_stress(0.02, 0.006, 0.01, 0.0005),
      v_rot(0.01, 0.005, 0.012, 0.0005);
  for (const Eigen::Vector4d& v : {v_calm, v_stress, v_rot}) {
    Eigen::Matrix4d c = 0.2 * v * v.transpose();
    c.diagonal() = v.array().square();
    s.covariances.push_back(c);
  }
  s.transition = Eigen::MatrixXd::Constant(3, 3, 0.01);
  s.transition.diagonal().setConstant(0.98);
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("wreg_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace wreg::fixture
