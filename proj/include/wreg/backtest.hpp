#pragma once

// Strictly causal daily backtests: the Wasserstein-template HMM strategy, the
// nearest-neighbour baseline and the two passive benchmarks.
//
// Day t of the out-of-sample period uses the feature row dated t (built from
// returns dated <= t-1), decides w_t, and realizes r^p_t = w_t' r_t.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wreg/data.hpp"
#include "wreg/error.hpp"
#include "wreg/estimators.hpp"
#include "wreg/hmm.hpp"
#include "wreg/metrics.hpp"
#include "wreg/optimizer.hpp"
#include "wreg/ot_geometry.hpp"

namespace wreg {

struct TemplateConfig {
  int count = 6;
  double eta = 0.05;
  int calibration_len = 500;  // feature rows before the split; 0 = all

  void validate() const {
    if (count < 1) throw ConfigError("templates: count must be >= 1");
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("templates: eta must be in (0, 1]");
    if (calibration_len < 0) throw ConfigError("templates: calibration_len must be >= 0");
  }
};

struct BacktestConfig {
  Date split_date;  // last in-sample date; out-of-sample days are strictly later
  FeatureConfig features;
  OrderSelectionConfig order;
  EmConfig em;
  bool warm_start = true;
  TemplateConfig templates;
  KnnConfig knn;
  MvoConfig mvo;
  PerfConfig perf;
  std::string equity_asset;  // buy-and-hold column; empty = first asset
  std::uint64_t seed = 42;
};

/// Returns and lagged features of one price panel.
struct MarketData {
  ReturnTable returns;
  FeatureMatrix features;
  Eigen::MatrixXd aligned_returns;  // row i = return realized on features.dates[i]

  static MarketData from_prices(const PriceTable& p, const FeatureConfig& fc) {
    MarketData m;
    m.returns = log_returns(p);
    m.features = build_features(m.returns, fc);
    m.aligned_returns.resize(static_cast<Eigen::Index>(m.features.rows()),
                             static_cast<Eigen::Index>(p.n_assets()));
    for (std::size_t i = 0; i < m.features.rows(); ++i)
      m.aligned_returns.row(static_cast<Eigen::Index>(i)) =
          m.returns.returns.row(static_cast<Eigen::Index>(m.features.return_row[i]));
    return m;
  }
  std::size_t n_assets() const { return returns.n_assets(); }
};

struct ScoreRow {
  Date date;
  int K = 0;
  double predll = 0.0;
  double complexity = 0.0;
  double score = 0.0;
  bool selected = false;
  std::string error;
};

struct SolveRow {
  Date date;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double turnover = 0.0;
  int binding_caps = 0;
};

struct NeighborRow {
  Date date;
  std::vector<Date> neighbor_dates;
  std::vector<double> distances;
};

struct TemplateRow {
  Date date;
  int label = 0;
  double prob = 0.0;
  Eigen::VectorXd mu;
  double trace_sigma = 0.0;
};

struct HoldEvent {
  Date date;
  std::string stage;
  std::string message;
};

struct BacktestResult {
  std::string strategy;
  std::vector<Date> dates;
  std::vector<std::string> assets;
  Eigen::MatrixXd weights;           // days x N
  Eigen::RowVectorXd initial_weights;
  std::vector<double> returns;       // gross, w_t' r_t
  std::vector<double> net_returns;   // returns - 2 tau TO_t
  Eigen::VectorXd turnover;
  Eigen::VectorXd neff;
  std::vector<int> regime_count;     // K_t, parametric only
  std::vector<int> dominant;         // g_t, parametric only
  std::vector<ScoreRow> scores;
  std::vector<SolveRow> solves;
  std::vector<NeighborRow> neighbors;
  std::vector<TemplateRow> templates;
  std::vector<HoldEvent> holds;

  std::size_t days() const { return dates.size(); }
};

namespace detail {

inline std::size_t first_oos_row(const FeatureMatrix& f, const Date& split) {
  const auto it = std::upper_bound(f.dates.begin(), f.dates.end(), split);
  const auto i0 = static_cast<std::size_t>(it - f.dates.begin());
  if (i0 >= f.rows()) throw DataError("no out-of-sample days after split date " + split.str());
  if (i0 == 0) throw DataError("no in-sample feature rows before split date " + split.str());
  return i0;
}

inline BacktestResult start_result(const std::string& name, const MarketData& md, std::size_t i0) {
  BacktestResult r;
  r.strategy = name;
  r.assets = md.returns.assets;
  r.dates.assign(md.features.dates.begin() + static_cast<std::ptrdiff_t>(i0),
                 md.features.dates.end());
  const auto days = static_cast<Eigen::Index>(r.dates.size());
  const auto N = static_cast<Eigen::Index>(md.n_assets());
  r.weights.resize(days, N);
  r.initial_weights = Eigen::RowVectorXd::Constant(N, 1.0 / static_cast<double>(N));
  return r;
}

inline void finish_result(BacktestResult& r, const MarketData& md, std::size_t i0, double tau) {
  r.turnover = turnover_series(r.weights, r.initial_weights);
  r.neff = neff_series(r.weights);
  r.returns.clear();
  r.net_returns.clear();
  for (Eigen::Index t = 0; t < r.weights.rows(); ++t) {
    const double gross =
        r.weights.row(t).dot(md.aligned_returns.row(static_cast<Eigen::Index>(i0) + t));
    r.returns.push_back(gross);
    r.net_returns.push_back(gross - 2.0 * tau * r.turnover(t));
  }
}

inline int argmax_label(const Eigen::VectorXd& p) {
  Eigen::Index best = 0;
  for (Eigen::Index g = 1; g < p.size(); ++g)
    if (p(g) > p(best)) best = g;
  return static_cast<int>(best);
}

}  // namespace detail

/// Rolling Gaussian HMM with periodic predictive order selection, W2
/// template tracking and cost-aware MVO.
inline BacktestResult run_parametric(const MarketData& md, const BacktestConfig& cfg) {
  cfg.order.validate();
  cfg.templates.validate();
  cfg.mvo.validate(md.n_assets());
  const auto& X = md.features.values;
  const std::size_t i0 = detail::first_oos_row(md.features, cfg.split_date);
  const auto N = static_cast<Eigen::Index>(md.n_assets());

  std::size_t calib_begin = 0;
  if (cfg.templates.calibration_len > 0 && i0 > static_cast<std::size_t>(cfg.templates.calibration_len))
    calib_begin = i0 - static_cast<std::size_t>(cfg.templates.calibration_len);
  // Calibration rows are dated strictly before the split date.
  std::size_t calib_end = i0;
  while (calib_end > calib_begin && !(md.features.dates[calib_end - 1] < cfg.split_date))
    --calib_end;
  const Eigen::MatrixXd calib =
      X.middleRows(static_cast<Eigen::Index>(calib_begin),
                   static_cast<Eigen::Index>(calib_end - calib_begin));
  TemplateSet templates = init_templates(calib, cfg.templates.count, cfg.seed, cfg.templates.eta, cfg.em);

  BacktestResult res = detail::start_result("parametric", md, i0);
  Eigen::VectorXd w_prev = res.initial_weights.transpose();
  std::optional<HmmModel> model;
  int last_k = 0, last_g = -1;

  for (std::size_t i = i0; i < md.features.rows(); ++i) {
    const std::size_t day = i - i0;
    const Date& date = md.features.dates[i];
    const Eigen::MatrixXd hist = X.topRows(static_cast<Eigen::Index>(i) + 1);
    std::string stage = "order_selection";
    try {
      if (day % static_cast<std::size_t>(cfg.order.select_every) == 0 || !model) {
        const OrderSelection sel = select_order(hist, cfg.order, cfg.seed, cfg.em);
        for (const auto& s : sel.table)
          res.scores.push_back({date, s.K, s.predll, s.complexity, s.score, s.K == sel.selected,
                                s.error});
        model = sel.selected_model();
      } else {
        stage = "hmm_fit";
        model = cfg.warm_start
                    ? fit_hmm(hist, *model, cfg.em)
                    : fit_hmm(hist, model->states(),
                              cfg.seed + static_cast<std::uint64_t>(model->states()), cfg.em);
      }
      stage = "filter";
      const FilterResult fr = filter(*model, hist);
      const Eigen::VectorXd p = fr.filtered.row(fr.filtered.rows() - 1).transpose();

      stage = "templates";
      const AssignmentResult a = assign_components(model->components, p, templates);
      templates = update_templates(std::move(templates), a, model->components, p);
      const GaussianComponent mix = mixture_moments(templates, a.probs);

      stage = "mvo";
      const MvoSolution sol = solve_mvo(mix.mu.head(N), mix.sigma.topLeftCorner(N, N), w_prev, cfg.mvo);
      res.weights.row(static_cast<Eigen::Index>(day)) = sol.w.transpose();
      res.solves.push_back({date, sol.objective, sol.kkt_residual,
                            0.5 * (sol.w - w_prev).lpNorm<1>(), sol.binding_caps});
      w_prev = sol.w;
      last_k = model->states();
      last_g = detail::argmax_label(a.probs);
      for (int g = 0; g < templates.size(); ++g) {
        const auto& tpl = templates.templates[static_cast<std::size_t>(g)];
        res.templates.push_back({date, g, a.probs(g), tpl.mu, tpl.sigma.trace()});
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      res.holds.push_back({date, stage, e.what()});
      res.weights.row(static_cast<Eigen::Index>(day)) = w_prev.transpose();
    }
    res.regime_count.push_back(last_k);
    res.dominant.push_back(last_g);
  }
  detail::finish_result(res, md, i0, cfg.mvo.tau);
  return res;
}

/// Nearest-neighbour conditional moments on the expanding history with the
/// same MVO layer.
inline BacktestResult run_knn(const MarketData& md, const BacktestConfig& cfg) {
  cfg.knn.validate(cfg.features.max_window());
  cfg.mvo.validate(md.n_assets());
  const auto& X = md.features.values;
  const std::size_t i0 = detail::first_oos_row(md.features, cfg.split_date);
  if (i0 < static_cast<std::size_t>(std::max(cfg.knn.min_history, cfg.knn.neighbors)))
    throw DataError("knn: " + std::to_string(i0) + " history rows before the split, need " +
                    std::to_string(std::max(cfg.knn.min_history, cfg.knn.neighbors)));

  BacktestResult res = detail::start_result("knn", md, i0);
  Eigen::VectorXd w_prev = res.initial_weights.transpose();
  for (std::size_t i = i0; i < md.features.rows(); ++i) {
    const std::size_t day = i - i0;
    const Date& date = md.features.dates[i];
    const auto rows = static_cast<Eigen::Index>(i);
    std::string stage = "knn";
    try {
      Eigen::MatrixXd hist = X.topRows(rows);
      Eigen::RowVectorXd query = X.row(rows);
      if (cfg.knn.standardize) {
        const auto st = Standardizer::fit(hist);
        hist = st.apply(hist);
        query = st.apply(query);
      }
      const Neighbors nb = knn_neighbors(hist, query, cfg.knn.neighbors);
      const MomentEstimate mom = knn_moments(md.aligned_returns.topRows(rows), nb.index);
      NeighborRow nr{date, {}, nb.distance};
      for (auto s : nb.index) nr.neighbor_dates.push_back(md.features.dates[static_cast<std::size_t>(s)]);
      res.neighbors.push_back(std::move(nr));

      stage = "mvo";
      const MvoSolution sol = solve_mvo(mom.mu, mom.sigma, w_prev, cfg.mvo);
      res.weights.row(static_cast<Eigen::Index>(day)) = sol.w.transpose();
      res.solves.push_back({date, sol.objective, sol.kkt_residual,
                            0.5 * (sol.w - w_prev).lpNorm<1>(), sol.binding_caps});
      w_prev = sol.w;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      res.holds.push_back({date, stage, e.what()});
      res.weights.row(static_cast<Eigen::Index>(day)) = w_prev.transpose();
    }
  }
  detail::finish_result(res, md, i0, cfg.mvo.tau);
  return res;
}

/// Buy-and-hold on the equity column and a static equal-weight portfolio
/// whose daily return is the mean of the asset log returns.
inline std::map<std::string, BacktestResult> run_benchmarks(const MarketData& md,
                                                            const BacktestConfig& cfg) {
  const std::size_t i0 = detail::first_oos_row(md.features, cfg.split_date);
  const auto N = static_cast<Eigen::Index>(md.n_assets());
  Eigen::Index eq = 0;
  if (!cfg.equity_asset.empty()) {
    const auto& a = md.returns.assets;
    const auto it = std::find(a.begin(), a.end(), cfg.equity_asset);
    if (it == a.end()) throw DataError("equity asset '" + cfg.equity_asset + "' not in data");
    eq = static_cast<Eigen::Index>(it - a.begin());
  }

  std::map<std::string, BacktestResult> out;
  BacktestResult bh = detail::start_result("buy_and_hold", md, i0);
  bh.weights.setZero();
  bh.weights.col(eq).setOnes();
  bh.initial_weights = bh.weights.row(0);
  detail::finish_result(bh, md, i0, 0.0);
  for (std::size_t t = 0; t < bh.days(); ++t)
    bh.returns[t] = bh.net_returns[t] = md.aligned_returns(static_cast<Eigen::Index>(i0 + t), eq);
  out.emplace("buy_and_hold", std::move(bh));

  BacktestResult ew = detail::start_result("equal_weight", md, i0);
  ew.weights.setConstant(1.0 / static_cast<double>(N));
  detail::finish_result(ew, md, i0, 0.0);
  for (std::size_t t = 0; t < ew.days(); ++t)
    ew.returns[t] = ew.net_returns[t] =
        md.aligned_returns.row(static_cast<Eigen::Index>(i0 + t)).mean();
  out.emplace("equal_weight", std::move(ew));
  return out;
}

}  // namespace wreg
