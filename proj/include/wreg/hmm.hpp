#pragma once

// Full-covariance Gaussian hidden Markov models: Baum-Welch fitting, scaled
// forward filtering, one-step-ahead predictive scoring and predictive
// model-order selection.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wreg/error.hpp"
#include "wreg/linalg.hpp"

namespace wreg {

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-5;           // relative log-likelihood change
  double ridge_scale = 1e-6;   // ridge = ridge_scale * mean diagonal of the data covariance
  int lloyd_iters = 20;        // k-means refinement of the seeded means
};

struct HmmModel {
  Eigen::VectorXd pi;
  Eigen::MatrixXd transition;  // row-stochastic K x K
  std::vector<GaussianComponent> components;
  double ridge = 0.0;
  // Training diagnostics: log-likelihood of every visited parameter set.
  std::vector<double> ll_history;
  bool converged = false;

  int states() const { return static_cast<int>(components.size()); }
  Eigen::Index dim() const { return components.empty() ? 0 : components.front().dim(); }
  double log_likelihood() const {
    return ll_history.empty() ? std::numeric_limits<double>::quiet_NaN() : ll_history.back();
  }
};

/// Output of the forward recursion. Row t of `predicted` is
/// P(z_t | x_0..x_{t-1}); row t of `filtered` is P(z_t | x_0..x_t);
/// `log_norm(t)` is log p(x_t | x_0..x_{t-1}).
struct FilterResult {
  Eigen::MatrixXd predicted;
  Eigen::MatrixXd filtered;
  Eigen::VectorXd log_norm;
  double log_likelihood = 0.0;
};

namespace detail {

class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::size_t index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

 private:
  std::mt19937_64 gen_;
};

/// n x K matrix of log N(x_t; mu_k, sigma_k).
inline Eigen::MatrixXd emission_log_density(const std::vector<GaussianComponent>& comps,
                                            const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(comps.size()));
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    Eigen::LLT<Eigen::MatrixXd> llt(comps[k].sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError("HMM covariance " + std::to_string(k) + " not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    Eigen::MatrixXd centered = (x.rowwise() - comps[k].mu.transpose()).transpose();
    llt.matrixL().solveInPlace(centered);
    out.col(static_cast<Eigen::Index>(k)) =
        (-0.5 * (static_cast<double>(d) * log2pi + log_det) -
         0.5 * centered.colwise().squaredNorm().array())
            .transpose();
  }
  return out;
}

struct ScaledEmissions {
  Eigen::MatrixXd e;       // exp(log b - row max)
  Eigen::VectorXd shift;   // row max
};

inline ScaledEmissions scale_emissions(const Eigen::MatrixXd& logb) {
  ScaledEmissions s;
  s.shift = logb.rowwise().maxCoeff();
  s.e = (logb.colwise() - s.shift).array().exp().matrix();
  return s;
}

inline FilterResult forward(const HmmModel& m, const ScaledEmissions& em) {
  const Eigen::Index n = em.e.rows(), K = em.e.cols();
  FilterResult r;
  r.predicted.resize(n, K);
  r.filtered.resize(n, K);
  r.log_norm.resize(n);
  Eigen::RowVectorXd prior = m.pi.transpose();
  for (Eigen::Index t = 0; t < n; ++t) {
    if (t > 0) prior = r.filtered.row(t - 1) * m.transition;
    prior /= prior.sum();
    r.predicted.row(t) = prior;
    const Eigen::RowVectorXd u = prior.cwiseProduct(em.e.row(t));
    const double c = u.sum();
    if (!(c > 0.0) || !std::isfinite(c))
      throw NumericalError("forward recursion underflow at step " + std::to_string(t));
    r.filtered.row(t) = u / c;
    r.log_norm(t) = std::log(c) + em.shift(t);
  }
  r.log_likelihood = r.log_norm.sum();
  if (!std::isfinite(r.log_likelihood)) throw NumericalError("non-finite HMM log-likelihood");
  return r;
}

inline double data_ridge(const Eigen::MatrixXd& x, double ridge_scale) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const double mean_diag = c.colwise().squaredNorm().sum() /
                           static_cast<double>(std::max<Eigen::Index>(1, x.rows() - 1)) /
                           static_cast<double>(x.cols());
  const double r = ridge_scale * mean_diag;
  return r > 0.0 ? r : ridge_scale;
}

inline std::size_t distinct_rows(const Eigen::MatrixXd& x) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    r.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) r[static_cast<std::size_t>(j)] = x(i, j);
  }
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

}  // namespace detail

inline FilterResult filter(const HmmModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.dim())
    throw std::invalid_argument("filter: feature dimension " + std::to_string(x.cols()) +
                                " does not match model dimension " + std::to_string(m.dim()));
  if (x.rows() == 0) throw std::invalid_argument("filter: empty observation matrix");
  return detail::forward(m, detail::scale_emissions(detail::emission_log_density(m.components, x)));
}

/// Seeds K means by k-means++ over the rows of `x`; covariances start at the
/// global covariance and pi, A are uniform.
inline HmmModel initial_model(const Eigen::MatrixXd& x, int K, std::uint64_t seed,
                              double ridge, int lloyd_iters = 0) {
  const Eigen::Index n = x.rows(), d = x.cols();
  detail::SplitMix rng(seed);
  std::vector<Eigen::Index> centers;
  centers.push_back(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  Eigen::VectorXd d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < K) {
    const double total = d2.sum();
    if (!(total > 0.0)) throw NumericalError("degenerate input: fewer distinct rows than states");
    double target = rng.uniform() * total, acc = 0.0;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += d2(i);
      if (acc > target && d2(i) > 0.0) {
        pick = i;
        break;
      }
    }
    while (d2(pick) == 0.0) --pick;
    centers.push_back(pick);
    d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }

  // Lloyd refinement of the seeded centers.
  Eigen::MatrixXd means(K, d);
  for (int k = 0; k < K; ++k) means.row(k) = x.row(centers[static_cast<std::size_t>(k)]);
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < lloyd_iters; ++it) {
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (means.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != static_cast<int>(best)) moved = true;
      assign[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    if (!moved) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, d);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int k = 0; k < K; ++k)
      if (counts(k) > 0.0) means.row(k) = sums.row(k) / counts(k);
  }

  const Eigen::Index n_den = std::max<Eigen::Index>(1, n);
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd global =
      symmetrized(c.transpose() * c / static_cast<double>(n_den)) +
      ridge * Eigen::MatrixXd::Identity(d, d);

  HmmModel m;
  m.ridge = ridge;
  m.pi = Eigen::VectorXd::Constant(K, 1.0 / K);
  m.transition = Eigen::MatrixXd::Constant(K, K, 1.0 / K);
  for (int k = 0; k < K; ++k) m.components.push_back({means.row(k).transpose(), global});
  return m;
}

/// Baum-Welch from a given starting model (warm start).
inline HmmModel fit_hmm(const Eigen::MatrixXd& x, HmmModel model, const EmConfig& cfg = {}) {
  const int K = model.states();
  const Eigen::Index n = x.rows(), d = x.cols();
  if (K < 1) throw std::invalid_argument("fit_hmm: K must be >= 1");
  if (n < K + 2) throw std::invalid_argument("fit_hmm: need at least K+2 rows");
  if (model.dim() != d) throw std::invalid_argument("fit_hmm: start model dimension mismatch");
  if (!x.allFinite()) throw NumericalError("fit_hmm: non-finite observations");

  const double ridge = detail::data_ridge(x, cfg.ridge_scale);
  model.ridge = ridge;
  model.ll_history.clear();
  model.converged = false;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

  for (int iter = 0;; ++iter) {
    const auto em = detail::scale_emissions(detail::emission_log_density(model.components, x));
    const FilterResult fw = detail::forward(model, em);
    const double ll = fw.log_likelihood;
    if (!model.ll_history.empty()) {
      const double prev = model.ll_history.back();
      model.ll_history.push_back(ll);
      if (std::abs(ll - prev) < cfg.tol * std::max(1.0, std::abs(prev))) {
        model.converged = true;
        break;
      }
    } else {
      model.ll_history.push_back(ll);
    }
    if (iter >= cfg.max_iters) break;

    // Backward pass with the forward normalizers.
    Eigen::MatrixXd beta(n, K);
    beta.row(n - 1).setOnes();
    Eigen::VectorXd c = (fw.log_norm - em.shift).array().exp();
    for (Eigen::Index t = n - 2; t >= 0; --t) {
      const Eigen::RowVectorXd w = em.e.row(t + 1).cwiseProduct(beta.row(t + 1)) / c(t + 1);
      beta.row(t) = (model.transition * w.transpose()).transpose();
    }
    Eigen::MatrixXd gamma = fw.filtered.cwiseProduct(beta);
    for (Eigen::Index t = 0; t < n; ++t) gamma.row(t) /= gamma.row(t).sum();

    Eigen::MatrixXd xi_sum = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index t = 0; t + 1 < n; ++t) {
      const Eigen::RowVectorXd w = em.e.row(t + 1).cwiseProduct(beta.row(t + 1)) / c(t + 1);
      xi_sum.noalias() += fw.filtered.row(t).transpose() * w;
    }
    xi_sum = xi_sum.cwiseProduct(model.transition);

    model.pi = gamma.row(0).transpose();
    model.pi /= model.pi.sum();
    for (int i = 0; i < K; ++i) {
      const double rs = xi_sum.row(i).sum();
      if (rs > 0.0) model.transition.row(i) = xi_sum.row(i) / rs;
    }
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXd g = gamma.col(k);
      const double nk = g.sum();
      if (!(nk > 1e-10)) continue;  // empty state keeps its parameters
      const Eigen::VectorXd mu = x.transpose() * g / nk;
      const Eigen::MatrixXd cen = x.rowwise() - mu.transpose();
      Eigen::MatrixXd cov = cen.transpose() * g.asDiagonal() * cen / nk;
      model.components[static_cast<std::size_t>(k)] = {mu, symmetrized(cov) + ridge * I};
    }
  }
  return model;
}

/// Baum-Welch from a seeded k-means++ start.
inline HmmModel fit_hmm(const Eigen::MatrixXd& x, int K, std::uint64_t seed,
                        const EmConfig& cfg = {}) {
  if (K < 1) throw std::invalid_argument("fit_hmm: K must be >= 1");
  if (x.rows() < K + 2) throw std::invalid_argument("fit_hmm: need at least K+2 rows");
  if (!x.allFinite()) throw NumericalError("fit_hmm: non-finite observations");
  if (detail::distinct_rows(x) < static_cast<std::size_t>(K))
    throw NumericalError("degenerate input: fewer distinct rows than states");
  const double ridge = detail::data_ridge(x, cfg.ridge_scale);
  return fit_hmm(x, initial_model(x, K, seed, ridge, cfg.lloyd_iters), cfg);
}

/// Stationary distribution of a row-stochastic matrix (least-squares solve of
/// pi A = pi, sum pi = 1; negatives clamped).
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& a) {
  const Eigen::Index K = a.rows();
  Eigen::MatrixXd sys(K + 1, K);
  sys.topRows(K) = a.transpose() - Eigen::MatrixXd::Identity(K, K);
  sys.row(K).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K + 1);
  rhs(K) = 1.0;
  Eigen::VectorXd p = sys.colPivHouseholderQr().solve(rhs).cwiseMax(0.0);
  const double s = p.sum();
  return s > 0.0 ? Eigen::VectorXd(p / s) : Eigen::VectorXd::Constant(K, 1.0 / K);
}

/// Sum of log p(x_s | x_0..x_{s-1}) over s >= validation_start, for a model
/// already fitted on the full history.
inline double predictive_log_score(const HmmModel& m, const Eigen::MatrixXd& x_hist,
                                   Eigen::Index validation_start) {
  if (validation_start < 0 || validation_start >= x_hist.rows())
    throw std::invalid_argument("predictive_log_score: empty validation slice");
  const FilterResult fr = filter(m, x_hist);
  const double s = fr.log_norm.tail(x_hist.rows() - validation_start).sum();
  if (!std::isfinite(s)) throw NumericalError("non-finite predictive log score");
  return s;
}

inline double predictive_log_score(const Eigen::MatrixXd& x_hist, Eigen::Index validation_start,
                                   int K, std::uint64_t seed, const EmConfig& cfg = {}) {
  return predictive_log_score(fit_hmm(x_hist, K, seed, cfg), x_hist, validation_start);
}

/// Free parameters of a K-state full-covariance Gaussian HMM in dimension d.
inline double hmm_complexity(int K, Eigen::Index d) {
  const double dd = static_cast<double>(d);
  return (K - 1) + static_cast<double>(K) * (K - 1) + K * (dd + dd * (dd + 1.0) / 2.0);
}

struct OrderSelectionConfig {
  int k_min = 2;
  int k_max = 6;
  int select_every = 5;       // F_K, in trading days
  int validation_len = 250;   // |V|
  double lambda_k = 10.0;     // penalty per free parameter

  void validate() const {
    if (k_min < 1 || k_max < k_min) throw ConfigError("hmm: need 1 <= k_min <= k_max");
    if (select_every < 1) throw ConfigError("hmm: select_every must be >= 1");
    if (validation_len < 1) throw ConfigError("hmm: validation_len must be >= 1");
    if (!(lambda_k >= 0.0)) throw ConfigError("hmm: lambda_k must be >= 0");
  }
};

struct OrderScore {
  int K = 0;
  double predll = std::numeric_limits<double>::quiet_NaN();
  double complexity = 0.0;
  double score = -std::numeric_limits<double>::infinity();
  std::optional<HmmModel> model;
  std::string error;  // non-empty when this K failed to fit
};

struct OrderSelection {
  int selected = 0;
  std::vector<OrderScore> table;

  const HmmModel& selected_model() const {
    for (const auto& s : table)
      if (s.K == selected) return *s.model;
    throw std::logic_error("selected model missing");
  }
};

/// Index of the maximal score, ties resolved toward the earliest entry.
inline std::size_t argmax_first(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

/// Fits every K in [k_min, k_max] on the full history (seed + K), scores the
/// last validation_len rows and returns the penalized argmax.
inline OrderSelection select_order(const Eigen::MatrixXd& x_hist, const OrderSelectionConfig& cfg,
                                   std::uint64_t seed, const EmConfig& em = {}) {
  cfg.validate();
  if (x_hist.rows() < cfg.validation_len + cfg.k_max + 2)
    throw std::invalid_argument("select_order: history shorter than validation_len + k_max + 2");
  const Eigen::Index vstart = x_hist.rows() - cfg.validation_len;

  OrderSelection out;
  for (int K = cfg.k_min; K <= cfg.k_max; ++K) {
    OrderScore s;
    s.K = K;
    s.complexity = hmm_complexity(K, x_hist.cols());
    try {
      HmmModel m = fit_hmm(x_hist, K, seed + static_cast<std::uint64_t>(K), em);
      s.predll = predictive_log_score(m, x_hist, vstart);
      s.score = s.predll - cfg.lambda_k * s.complexity;
      s.model = std::move(m);
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    out.table.push_back(std::move(s));
  }
  std::vector<double> scores;
  bool any = false;
  for (const auto& s : out.table) {
    scores.push_back(s.model ? s.score : -std::numeric_limits<double>::infinity());
    any = any || s.model.has_value();
  }
  if (!any) throw NumericalError("select_order: every candidate order failed to fit");
  out.selected = out.table[argmax_first(scores)].K;
  return out;
}

}  // namespace wreg
