#pragma once

// Transaction-cost-aware mean-variance optimization:
//
//   max_w  mu'w - gamma w'Sigma w - tau |w - w_prev|_1
//   s.t.   1'w = 1,  0 <= w <= w_max.
//
// Solved as the equivalent convex minimization of
// f(w) = 1/2 w'Qw - mu'w + tau |w - w_prev|_1, Q = 2 gamma Sigma, with an
// accelerated proximal-gradient phase (exact prox of the L1 term restricted
// to the capped simplex) followed by an active-set polish that solves the
// KKT system of the buy/sell split exactly. The L1 term is never smoothed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "wreg/error.hpp"
#include "wreg/linalg.hpp"

namespace wreg {

struct MvoConfig {
  double gamma = 5.0;
  double tau = 0.001;
  double w_max = 0.35;

  void validate(std::size_t n_assets) const {
    if (!(gamma > 0.0)) throw ConfigError("mvo: gamma must be > 0");
    if (!(tau >= 0.0)) throw ConfigError("mvo: tau must be >= 0");
    if (!(w_max > 0.0 && w_max <= 1.0)) throw ConfigError("mvo: w_max must be in (0, 1]");
    if (w_max * static_cast<double>(n_assets) < 1.0 - 1e-12)
      throw ConfigError("mvo: w_max * N < 1 leaves the capped simplex empty");
  }
};

struct MvoSolution {
  Eigen::VectorXd w;
  double objective = 0.0;     // mu'w - gamma w'Sigma w - tau |w - w_prev|_1
  double kkt_residual = 0.0;
  int iterations = 0;
  int binding_caps = 0;
  bool polished = false;
};

namespace detail {

struct MvoProblem {
  Eigen::MatrixXd Q;  // 2 gamma (Sigma + ridge I)
  Eigen::VectorXd mu;
  Eigen::VectorXd prev;
  double tau = 0.0;
  double cap = 1.0;

  Eigen::Index n() const { return mu.size(); }
  double f(const Eigen::VectorXd& w) const {
    return 0.5 * w.dot(Q * w) - mu.dot(w) + tau * (w - prev).lpNorm<1>();
  }
};

// argmin_w 1/2|w - v|^2 + a |w - p|_1 over {1'w = 1, 0 <= w <= cap}.
inline Eigen::VectorXd prox_capped_simplex(const Eigen::VectorXd& v, const Eigen::VectorXd& p,
                                           double a, double cap) {
  const Eigen::Index n = v.size();
  auto at = [&](double lambda, Eigen::VectorXd& w) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = v(i) + lambda - p(i);
      const double soft = u > a ? u - a : (u < -a ? u + a : 0.0);
      w(i) = std::clamp(p(i) + soft, 0.0, cap);
    }
    return w.sum();
  };
  Eigen::VectorXd w(n);
  const double span = v.cwiseAbs().maxCoeff() + p.cwiseAbs().maxCoeff() + a + cap + 1.0;
  double lo = -span, hi = span;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (at(mid, w) < 1.0 ? lo : hi) = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  double s = at(lambda, w);
  // Spread the remaining rounding error over coordinates on a linear piece.
  std::vector<Eigen::Index> movable;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = v(i) + lambda - p(i);
    if (std::abs(u) > a && w(i) > 0.0 && w(i) < cap) movable.push_back(i);
  }
  if (!movable.empty()) {
    const double shift = (1.0 - s) / static_cast<double>(movable.size());
    for (auto i : movable) w(i) = std::clamp(w(i) + shift, 0.0, cap);
  }
  return w;
}

struct Stationarity {
  double residual = 0.0;
  double lambda = 0.0;
};

// Subdifferential of tau|w_i - p_i| + indicator[0, cap] at w_i, shifted by the
// smooth gradient; the minimal KKT violation over the equality multiplier is
// half the gap between the largest lower end and the smallest upper end.
inline Stationarity stationarity(const MvoProblem& pb, const Eigen::VectorXd& w, double tol) {
  const Eigen::VectorXd g = pb.Q * w - pb.mu;
  const double inf = std::numeric_limits<double>::infinity();
  double max_lo = -inf, min_hi = inf;
  for (Eigen::Index i = 0; i < pb.n(); ++i) {
    double lo, hi;
    if (w(i) > pb.prev(i) + tol) {
      lo = hi = pb.tau;
    } else if (w(i) < pb.prev(i) - tol) {
      lo = hi = -pb.tau;
    } else {
      lo = -pb.tau;
      hi = pb.tau;
    }
    if (w(i) <= tol) lo = -inf;
    if (w(i) >= pb.cap - tol) hi = inf;
    max_lo = std::max(max_lo, g(i) + lo);
    min_hi = std::min(min_hi, g(i) + hi);
  }
  Stationarity s;
  s.residual = std::max(0.0, 0.5 * (max_lo - min_hi));
  if (std::isfinite(max_lo) && std::isfinite(min_hi))
    s.lambda = 0.5 * (max_lo + min_hi);
  else if (std::isfinite(max_lo))
    s.lambda = max_lo;
  else if (std::isfinite(min_hi))
    s.lambda = min_hi;
  return s;
}

inline double primal_violation(const MvoProblem& pb, const Eigen::VectorXd& w) {
  double v = std::abs(w.sum() - 1.0);
  for (Eigen::Index i = 0; i < pb.n(); ++i) v = std::max({v, -w(i), w(i) - pb.cap});
  return v;
}

enum class Slot { Zero, Cap, Kink, Buy, Sell };

// Active-set polish: classify coordinates, solve the equality-constrained KKT
// system and repair violations (primal-dual active set). Returns true and
// overwrites `w` when an exact KKT point is found.
inline bool polish(const MvoProblem& pb, Eigen::VectorXd& w, double scale) {
  const Eigen::Index n = pb.n();
  const double tol = 1e-9;
  std::vector<Slot> slot(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& s = slot[static_cast<std::size_t>(i)];
    if (w(i) <= tol)
      s = Slot::Zero;
    else if (w(i) >= pb.cap - tol)
      s = Slot::Cap;
    else if (pb.tau > 0.0 && std::abs(w(i) - pb.prev(i)) <= tol)
      s = Slot::Kink;
    else
      s = w(i) > pb.prev(i) ? Slot::Buy : Slot::Sell;
  }

  for (int round = 0; round < 4 * static_cast<int>(n) + 4; ++round) {
    std::vector<Eigen::Index> free;
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      switch (slot[static_cast<std::size_t>(i)]) {
        case Slot::Zero: cand(i) = 0.0; break;
        case Slot::Cap: cand(i) = pb.cap; break;
        case Slot::Kink: cand(i) = pb.prev(i); break;
        default: free.push_back(i);
      }
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    double lambda = 0.0;
    if (m > 0) {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd rhs(m + 1);
      double fixed_sum = cand.sum();
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index i = free[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < m; ++b) kkt(a, b) = pb.Q(i, free[static_cast<std::size_t>(b)]);
        kkt(a, m) = -1.0;
        kkt(m, a) = 1.0;
        const double sign = slot[static_cast<std::size_t>(i)] == Slot::Buy ? 1.0 : -1.0;
        rhs(a) = pb.mu(i) - pb.Q.row(i).dot(cand) - sign * pb.tau;
      }
      rhs(m) = 1.0 - fixed_sum;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
      if (!lu.isInvertible()) return false;
      const Eigen::VectorXd sol = lu.solve(rhs);
      if (!sol.allFinite()) return false;
      for (Eigen::Index a = 0; a < m; ++a) cand(free[static_cast<std::size_t>(a)]) = sol(a);
      lambda = sol(m);
    } else if (std::abs(cand.sum() - 1.0) > 1e-12) {
      return false;
    } else {
      lambda = stationarity(pb, cand, 0.0).lambda;
    }

    // Primal repair: free coordinates must stay inside their segment.
    bool changed = false;
    for (Eigen::Index a = 0; a < m; ++a) {
      const Eigen::Index i = free[static_cast<std::size_t>(a)];
      auto& s = slot[static_cast<std::size_t>(i)];
      const double x = cand(i);
      const double seg_lo = s == Slot::Buy ? std::max(pb.prev(i), 0.0) : 0.0;
      const double seg_hi = s == Slot::Buy ? pb.cap : std::min(pb.prev(i), pb.cap);
      if (x < seg_lo - 1e-13) {
        s = (s == Slot::Buy && pb.prev(i) > 0.0) ? Slot::Kink : Slot::Zero;
        changed = true;
      } else if (x > seg_hi + 1e-13) {
        s = (s == Slot::Sell && pb.prev(i) < pb.cap) ? Slot::Kink : Slot::Cap;
        changed = true;
      }
    }
    if (changed) continue;

    // Dual repair: pinned coordinates must admit the common multiplier.
    const Eigen::VectorXd g = pb.Q * cand - pb.mu;
    const double dtol = 1e-11 * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& s = slot[static_cast<std::size_t>(i)];
      if (s == Slot::Buy || s == Slot::Sell) continue;
      const double x = cand(i);
      const double inf = std::numeric_limits<double>::infinity();
      double lo = x > pb.prev(i) ? pb.tau : -pb.tau;
      double hi = x < pb.prev(i) ? -pb.tau : pb.tau;
      if (s == Slot::Zero) lo = -inf;
      if (s == Slot::Cap) hi = inf;
      if (lambda > g(i) + hi + dtol) {
        // The Lagrangian decreases as w_i grows.
        s = x < pb.prev(i) ? Slot::Sell : Slot::Buy;
        changed = true;
      } else if (lambda < g(i) + lo - dtol) {
        s = x > pb.prev(i) ? Slot::Buy : Slot::Sell;
        changed = true;
      }
    }
    if (changed) continue;

    if (primal_violation(pb, cand) > 1e-12) return false;
    if (stationarity(pb, cand, 1e-12).residual > 1e-10 * scale) return false;
    w = cand;
    return true;
  }
  return false;
}

}  // namespace detail

/// Global maximizer of the cost-aware mean-variance problem. `w_prev` is the
/// previous allocation (a feasible vector or all zeros for a cold start).
inline MvoSolution solve_mvo(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                             const Eigen::VectorXd& w_prev, const MvoConfig& cfg) {
  const Eigen::Index n = mu.size();
  if (n < 1 || sigma.rows() != n || sigma.cols() != n || w_prev.size() != n)
    throw std::invalid_argument("solve_mvo: dimension mismatch");
  cfg.validate(static_cast<std::size_t>(n));
  if (!mu.allFinite() || !sigma.allFinite() || !w_prev.allFinite())
    throw NumericalError("solve_mvo: non-finite input");
  const double smax = std::max(1e-300, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-8 * smax)
    throw NumericalError("solve_mvo: sigma not symmetric");
  const Eigen::MatrixXd sym = symmetrized(sigma);
  if (min_eigenvalue(sym) < -1e-10 * std::max(1e-300, max_eigenvalue(sym)) && sigma.trace() != 0.0)
    throw NumericalError("solve_mvo: sigma not positive semidefinite");

  detail::MvoProblem pb;
  const double ridge = 1e-10 * std::max(0.0, sym.trace()) / static_cast<double>(n);
  pb.Q = 2.0 * cfg.gamma * (sym + ridge * Eigen::MatrixXd::Identity(n, n));
  pb.mu = mu;
  pb.prev = w_prev;
  pb.tau = cfg.tau;
  pb.cap = cfg.w_max;

  const double lip = std::max(max_eigenvalue(pb.Q), 1e-12 * (1.0 + mu.cwiseAbs().maxCoeff()));
  const double step = 1.0 / lip;
  const double scale = 1.0 + mu.cwiseAbs().maxCoeff() + pb.Q.cwiseAbs().maxCoeff() + cfg.tau;

  Eigen::VectorXd w = detail::prox_capped_simplex(w_prev, w_prev, 0.0, cfg.w_max);
  Eigen::VectorXd y = w;
  double t = 1.0, fw = pb.f(w);
  MvoSolution out;
  bool done = false;
  const int max_iters = 100000;
  int it = 0;
  for (; it < max_iters && !done; ++it) {
    const Eigen::VectorXd grad = pb.Q * y - pb.mu;
    Eigen::VectorXd next =
        detail::prox_capped_simplex(y - step * grad, pb.prev, step * pb.tau, pb.cap);
    const double fn = pb.f(next);
    if (fn > fw) {
      // Function-value restart.
      t = 1.0;
      y = w;
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / tn) * (next - w);
    const double move = (next - w).cwiseAbs().maxCoeff();
    w = next;
    fw = fn;
    t = tn;
    if (it % 10 == 0 || move < 1e-15) {
      Eigen::VectorXd cand = w;
      if (detail::polish(pb, cand, scale)) {
        w = cand;
        out.polished = true;
        done = true;
      }
    }
  }

  out.w = w;
  out.iterations = it;
  out.kkt_residual = std::max(detail::stationarity(pb, w, 1e-12).residual,
                              detail::primal_violation(pb, w));
  if (out.kkt_residual > 1e-7)
    throw NumericalError("solve_mvo: no convergence, KKT residual " +
                         std::to_string(out.kkt_residual));
  out.objective = mu.dot(w) - cfg.gamma * w.dot(sigma * w) - cfg.tau * (w - w_prev).lpNorm<1>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (w(i) >= cfg.w_max - 1e-12) ++out.binding_caps;
  return out;
}

}  // namespace wreg
