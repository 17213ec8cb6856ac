#pragma once

// 2-Wasserstein geometry of Gaussians and persistent regime templates.
//
// Each day the freshly fitted HMM components are mapped onto the nearest
// template under W2, template probabilities are the summed component
// probabilities, and templates drift toward their assigned components by
// exponential smoothing. Template labels are fixed at initialization.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "wreg/hmm.hpp"
#include "wreg/linalg.hpp"

namespace wreg {

/// Squared W2 between N(a.mu, a.sigma) and N(b.mu, b.sigma):
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_b^1/2 S_a S_b^1/2)^1/2).
/// The cross trace is evaluated as the nuclear norm of S_a^1/2 S_b^1/2, which
/// avoids a second square root and keeps W2(a, a) at rounding level. The
/// covariance term is clamped at zero.
inline double w2_squared(const GaussianComponent& a, const GaussianComponent& b) {
  if (a.dim() != b.dim() || a.sigma.rows() != a.dim() || b.sigma.rows() != b.dim())
    throw std::invalid_argument("w2_distance: dimension mismatch");
  const double mean_term = (a.mu - b.mu).squaredNorm();
  const Eigen::MatrixXd cross = sqrtm_psd(a.sigma) * sqrtm_psd(b.sigma);
  const double nuclear = Eigen::JacobiSVD<Eigen::MatrixXd>(cross).singularValues().sum();
  const double cov_term = std::max(0.0, a.sigma.trace() + b.sigma.trace() - 2.0 * nuclear);
  return mean_term + cov_term;
}

inline double w2_distance(const GaussianComponent& a, const GaussianComponent& b) {
  return std::sqrt(w2_squared(a, b));
}

struct TemplateSet {
  std::vector<GaussianComponent> templates;  // index == label, never reordered
  double eta = 0.05;

  int size() const { return static_cast<int>(templates.size()); }
};

struct AssignmentResult {
  std::vector<int> mapping;      // component k -> template g(k)
  Eigen::VectorXd probs;         // aggregated p_{t,g}, length G
  Eigen::MatrixXd distances;     // K x G W2 distances
};

/// Nearest-template assignment; ties go to the smallest label.
inline AssignmentResult assign_components(const std::vector<GaussianComponent>& components,
                                          const Eigen::VectorXd& probs, const TemplateSet& ts) {
  const auto K = static_cast<Eigen::Index>(components.size());
  if (K < 1 || probs.size() != K)
    throw std::invalid_argument("assign_components: component/probability count mismatch");
  if (ts.size() < 1) throw std::invalid_argument("assign_components: empty template set");
  const Eigen::Index G = ts.size();

  AssignmentResult r;
  r.distances.resize(K, G);
  r.probs = Eigen::VectorXd::Zero(G);
  for (Eigen::Index k = 0; k < K; ++k) {
    Eigen::Index best = 0;
    for (Eigen::Index g = 0; g < G; ++g) {
      r.distances(k, g) = w2_distance(components[static_cast<std::size_t>(k)],
                                      ts.templates[static_cast<std::size_t>(g)]);
      if (r.distances(k, g) < r.distances(k, best)) best = g;
    }
    r.mapping.push_back(static_cast<int>(best));
    r.probs(best) += probs(k);
  }
  return r;
}

/// Posterior-weighted component averages per template, then
/// theta_g <- (1 - eta) theta_g + eta * average. Templates without mass are kept.
inline TemplateSet update_templates(TemplateSet ts, const AssignmentResult& a,
                                    const std::vector<GaussianComponent>& components,
                                    const Eigen::VectorXd& probs) {
  const double eta = ts.eta;
  for (int g = 0; g < ts.size(); ++g) {
    auto& tpl = ts.templates[static_cast<std::size_t>(g)];
    double mass = 0.0;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(tpl.dim());
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(tpl.dim(), tpl.dim());
    for (std::size_t k = 0; k < components.size(); ++k) {
      if (a.mapping[k] != g) continue;
      const double p = probs(static_cast<Eigen::Index>(k));
      mass += p;
      mu += p * components[k].mu;
      sigma += p * components[k].sigma;
    }
    if (!(mass > 0.0)) continue;
    tpl.mu = (1.0 - eta) * tpl.mu + eta * (mu / mass);
    tpl.sigma = symmetrized((1.0 - eta) * tpl.sigma + eta * (sigma / mass));
  }
  return ts;
}

/// Template-probability-weighted moments (no between-template mean term).
inline GaussianComponent mixture_moments(const TemplateSet& ts, const Eigen::VectorXd& p) {
  if (p.size() != ts.size()) throw std::invalid_argument("mixture_moments: size mismatch");
  const Eigen::Index d = ts.templates.front().dim();
  GaussianComponent out{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  for (int g = 0; g < ts.size(); ++g) {
    out.mu += p(g) * ts.templates[static_cast<std::size_t>(g)].mu;
    out.sigma += p(g) * ts.templates[static_cast<std::size_t>(g)].sigma;
  }
  out.sigma = symmetrized(out.sigma);
  return out;
}

/// Fits a G-state HMM on the calibration window; labels follow descending
/// stationary mass of the fitted chain (ties by state index).
inline TemplateSet init_templates(const Eigen::MatrixXd& x_calib, int G, std::uint64_t seed,
                                  double eta, const EmConfig& em = {}) {
  if (G < 1) throw std::invalid_argument("init_templates: G must be >= 1");
  if (x_calib.rows() < G + 2) throw std::invalid_argument("init_templates: calibration too short");
  const HmmModel m = fit_hmm(x_calib, G, seed, em);
  const Eigen::VectorXd stat = stationary_distribution(m.transition);
  std::vector<int> order(static_cast<std::size_t>(G));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return stat(a) > stat(b); });
  TemplateSet ts;
  ts.eta = eta;
  for (int k : order) ts.templates.push_back(m.components[static_cast<std::size_t>(k)]);
  return ts;
}

}  // namespace wreg
