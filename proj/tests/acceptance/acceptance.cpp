// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 5 7        run a subset
//
// Exit status is non-zero when any selected criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "wreg/backtest.hpp"
#include "wreg/config.hpp"

namespace fs = std::filesystem;
using namespace wreg;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GaussianComponent random_gaussian(std::mt19937_64& rng, Eigen::Index d) {
  return {fixture::random_vector(rng, d), fixture::random_psd(rng, d)};
}

// 1 -------------------------------------------------------------------------
Verdict w2_oracle() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_real_distribution<double> var(0.01, 4.0);
  double sym = 0.0, self = 0.0, tri = 0.0, diag = 0.0, neg = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = dim(rng);
    const auto a = random_gaussian(rng, d), b = random_gaussian(rng, d), c = random_gaussian(rng, d);
    const double ab = w2_distance(a, b);
    sym = std::max(sym, std::abs(ab - w2_distance(b, a)));
    neg = std::min(neg, ab);
    self = std::max(self, w2_distance(a, a));
    tri = std::max(tri, ab - w2_distance(a, c) - w2_distance(c, b));

    Eigen::VectorXd av(d), bv(d);
    double one_d = 0.0;
    for (int j = 0; j < d; ++j) {
      av(j) = var(rng);
      bv(j) = var(rng);
      one_d += std::pow(std::sqrt(av(j)) - std::sqrt(bv(j)), 2);
    }
    const GaussianComponent da{a.mu, av.asDiagonal()}, db{b.mu, bv.asDiagonal()};
    diag = std::max(diag, std::abs(w2_distance(da, db) - std::sqrt((a.mu - b.mu).squaredNorm() + one_d)));
  }
  // Self-distance: the square root amplifies rounding in the clamped trace
  // term, so "zero" is checked at 1e-6.
  const bool ok = sym <= 1e-8 && neg >= 0.0 && self <= 1e-6 && tri <= 1e-6 && diag <= 1e-8;
  return {ok, fmt("max |asym| %.1e, min W2 %.1e, max self %.1e, max triangle excess %.1e, "
                  "max diagonal error %.1e",
                  sym, neg, self, tri, diag)};
}

// 2 -------------------------------------------------------------------------
Verdict sqrtm_reconstruction() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> dim(1, 15);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const int d = dim(rng);
    std::uniform_int_distribution<int> rank(1, d);
    const Eigen::MatrixXd s = fixture::random_psd(rng, d, i % 3 == 0 ? rank(rng) : d);
    const Eigen::MatrixXd r = sqrtm_psd(s);
    worst = std::max(worst, (r * r - s).norm() / s.norm());
  }
  return {worst < 1e-6, fmt("max relative Frobenius error %.2e over 500 matrices", worst)};
}

// 3 -------------------------------------------------------------------------
double mvo_objective(const Eigen::VectorXd& mu, const Eigen::MatrixXd& s, const Eigen::VectorXd& prev,
                     const MvoConfig& c, const Eigen::VectorXd& w) {
  return mu.dot(w) - c.gamma * w.dot(s * w) - c.tau * (w - prev).lpNorm<1>();
}

double grid_best(const Eigen::VectorXd& mu, const Eigen::MatrixXd& s, const Eigen::VectorXd& prev,
                 const MvoConfig& c) {
  const int n = 100;
  double best = -1e300;
  auto visit = [&](const Eigen::VectorXd& w) {
    if ((w.array() > c.w_max + 1e-12).any()) return;
    best = std::max(best, mvo_objective(mu, s, prev, c, w));
  };
  if (mu.size() == 2)
    for (int i = 0; i <= n; ++i) visit(Eigen::Vector2d(i / 100.0, (n - i) / 100.0));
  else
    for (int i = 0; i <= n; ++i)
      for (int j = 0; i + j <= n; ++j) visit(Eigen::Vector3d(i / 100.0, j / 100.0, (n - i - j) / 100.0));
  return best;
}

Verdict mvo_optimality() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int below_grid = 0, kkt_fail = 0, mono_fail = 0;
  double worst_gap = -1e300, worst_kkt = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index n = 2 + i % 2;
    const Eigen::VectorXd mu = fixture::random_vector(rng, n) * 0.002;
    const Eigen::MatrixXd s = fixture::random_psd(rng, n, 1 + i % static_cast<int>(n)) * 1e-4;
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(n);
    if (i % 4 != 0) {
      for (Eigen::Index j = 0; j < n; ++j) prev(j) = u(rng);
      prev /= prev.sum();
    }
    MvoConfig c{1.0 + 9.0 * u(rng), 0.002 * u(rng), 1.0};
    if (n == 3 && i % 3 == 0) c.w_max = 0.5;
    if (n == 3 && i % 3 == 0) prev = prev.cwiseMin(0.5) / prev.cwiseMin(0.5).sum();
    if ((prev.array() > c.w_max).any()) prev.setConstant(1.0 / static_cast<double>(n));
    if (i % 4 == 0) prev.setZero();

    const MvoSolution sol = solve_mvo(mu, s, prev, c);
    const double gap = grid_best(mu, s, prev, c) - sol.objective;
    worst_gap = std::max(worst_gap, gap);
    worst_kkt = std::max(worst_kkt, sol.kkt_residual);
    below_grid += gap > 1e-6;
    kkt_fail += sol.kkt_residual > 1e-7;

    double last = 1e300;
    for (double tau : {0.0, 0.0005, 0.001, 0.005, 0.01}) {
      c.tau = tau;
      const double to = (solve_mvo(mu, s, prev, c).w - prev).lpNorm<1>();
      mono_fail += to > last + 1e-8;
      last = to;
    }
  }
  return {below_grid == 0 && kkt_fail == 0 && mono_fail == 0,
          fmt("grid shortfalls %d (worst grid - solver %.2e), KKT failures %d (max %.1e), "
              "tau-monotonicity violations %d",
              below_grid, worst_gap, kkt_fail, worst_kkt, mono_fail)};
}

// 4 -------------------------------------------------------------------------
// Ledoit-Wolf 2004 restated from its definitions with the normalized
// Frobenius inner product <A, B> = tr(A B')/p.
struct LwOracle {
  Eigen::MatrixXd sigma;
  double rho;
};

LwOracle lw_oracle(const Eigen::MatrixXd& r) {
  const double n = static_cast<double>(r.rows()), p = static_cast<double>(r.cols());
  auto inner = [p](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a * b.transpose()).trace() / p; };
  Eigen::MatrixXd x = r;
  for (Eigen::Index j = 0; j < r.cols(); ++j) x.col(j).array() -= r.col(j).sum() / n;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(r.cols(), r.cols());
  for (Eigen::Index k = 0; k < r.rows(); ++k) s += x.row(k).transpose() * x.row(k) / n;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(r.cols(), r.cols());
  const double m = inner(s, eye);
  const double d2 = inner(s - m * eye, s - m * eye);
  double bbar2 = 0.0;
  for (Eigen::Index k = 0; k < r.rows(); ++k) {
    const Eigen::MatrixXd e = x.row(k).transpose() * x.row(k) - s;
    bbar2 += inner(e, e);
  }
  bbar2 /= n * n;
  const double b2 = std::min(bbar2, d2), a2 = d2 - b2;
  if (d2 == 0.0) return {s, 0.0};
  return {(b2 / d2) * m * eye + (a2 / d2) * s, b2 / d2};
}

Verdict ledoit_wolf_oracle() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> nn(2, 120), pp(1, 12);
  double worst = 0.0;
  bool rho_ok = true;
  for (int i = 0; i < 100; ++i) {
    const int n = nn(rng), p = pp(rng);
    const Eigen::MatrixXd scale = fixture::random_psd(rng, p).llt().matrixL();
    const Eigen::MatrixXd r = fixture::random_matrix(rng, n, p) * scale.transpose() * 0.01;
    const ShrinkageResult lw = ledoit_wolf(r);
    const LwOracle ref = lw_oracle(r);
    const double tol_scale = std::max(1.0, ref.sigma.cwiseAbs().maxCoeff());
    worst = std::max({worst, (lw.covariance - ref.sigma).cwiseAbs().maxCoeff() / tol_scale,
                      std::abs(lw.rho - ref.rho)});
    rho_ok = rho_ok && lw.rho >= 0.0 && lw.rho <= 1.0;
  }
  return {worst <= 1e-10 && rho_ok,
          fmt("max deviation from oracle %.1e; rho in [0,1] on all: %s", worst, rho_ok ? "yes" : "no")};
}

// 5 -------------------------------------------------------------------------
double best_permutation_accuracy(const std::vector<int>& inferred, const std::vector<int>& truth, int K) {
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    std::size_t ok = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) ok += perm[static_cast<std::size_t>(inferred[t])] == truth[t];
    best = std::max(best, static_cast<double>(ok) / static_cast<double>(truth.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Verdict hmm_recovery() {
  int good = 0;
  double lo = 1.0;
  for (int seed = 0; seed < 20; ++seed) {
    const SyntheticMarket m = generate(fixture::recovery_market(), 3001, 1000 + static_cast<std::uint64_t>(seed));
    const MarketData md = MarketData::from_prices(m.prices, {});
    const Eigen::MatrixXd& x = md.features.values;
    const FilterResult f = filter(fit_hmm(x, 3, static_cast<std::uint64_t>(seed)), x);
    std::vector<int> inferred, truth;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Eigen::Index k;
      f.filtered.row(i).maxCoeff(&k);
      inferred.push_back(static_cast<int>(k));
      // Row i carries the previous day's return, whose regime is the target.
      truth.push_back(m.labels[md.features.return_row[static_cast<std::size_t>(i)] - 1]);
    }
    const double acc = best_permutation_accuracy(inferred, truth, 3);
    lo = std::min(lo, acc);
    good += acc >= 0.85;
  }
  return {good >= 16, fmt("%d/20 seeds with accuracy >= 85%% (worst %.3f)", good, lo)};
}

// 6 -------------------------------------------------------------------------
Verdict order_selection() {
  OrderSelectionConfig cfg;
  cfg.k_min = 1;
  cfg.k_max = 6;
  int good = 0;
  std::map<int, int> hist;
  for (int seed = 0; seed < 20; ++seed) {
    const SyntheticMarket m = generate(fixture::recovery_market(), 3001, 1000 + static_cast<std::uint64_t>(seed));
    const Eigen::MatrixXd x = MarketData::from_prices(m.prices, {}).features.values;
    int dates = 0, inside = 0;
    for (Eigen::Index n = 600; n <= x.rows(); n += 200) {
      const int k = select_order(x.topRows(n), cfg, static_cast<std::uint64_t>(seed)).selected;
      ++hist[k];
      ++dates;
      inside += k >= 2 && k <= 4;
    }
    good += inside >= 0.7 * dates;
  }
  std::string h;
  for (auto [k, c] : hist) h += fmt(" K=%d:%d", k, c);
  return {good >= 16, fmt("%d/20 seeds with >= 70%% of selections in {2,3,4};", good) + h};
}

// 7-9 -----------------------------------------------------------------------
struct StressRun {
  double turnover_ratio = 0.0;
  double agreement = 0.0;
  double eq_stress = 0.0, eq_all = 0.0;
  double bond_stress = 0.0, bond_all = 0.0;
};

double label_agreement(const std::vector<int>& a, const std::vector<int>& b, int G) {
  // Best single relabelling of run b, held fixed over the whole path.
  Eigen::MatrixXd conf = Eigen::MatrixXd::Zero(G, G);
  for (std::size_t t = 0; t < a.size(); ++t) conf(a[t], b[t]) += 1.0;
  std::vector<int> perm(static_cast<std::size_t>(G));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (int g = 0; g < G; ++g) s += conf(g, perm[static_cast<std::size_t>(g)]);
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

BacktestConfig stress_config() {
  BacktestConfig cfg;
  cfg.order.select_every = 10;
  cfg.mvo.tau = 0.0002;
  return cfg;
}

const std::vector<StressRun>& stress_runs() {
  static std::vector<StressRun> runs = [] {
    std::vector<StressRun> out;
    for (int seed = 0; seed < 20; ++seed) {
      const SyntheticMarket m = generate(fixture::stress_market(), 1500, 2000 + static_cast<std::uint64_t>(seed));
      BacktestConfig cfg = stress_config();
      const MarketData md = MarketData::from_prices(m.prices, cfg.features);
      cfg.split_date = md.features.dates[700];
      const BacktestResult p = run_parametric(md, cfg);
      const BacktestResult k = run_knn(md, cfg);
      cfg.seed = 7;
      const BacktestResult p2 = run_parametric(md, cfg);

      StressRun r;
      r.turnover_ratio = p.turnover.mean() / k.turnover.mean();
      r.agreement = label_agreement(p.dominant, p2.dominant, cfg.templates.count);
      const std::size_t i0 = md.features.rows() - p.days();
      int ns = 0;
      for (std::size_t t = 0; t < p.days(); ++t) {
        const bool stress = m.labels[md.features.return_row[i0 + t]] == 1;
        const auto row = static_cast<Eigen::Index>(t);
        r.eq_all += p.weights(row, 0);
        r.bond_all += p.weights(row, 1);
        if (stress) {
          r.eq_stress += p.weights(row, 0);
          r.bond_stress += p.weights(row, 1);
          ++ns;
        }
      }
      r.eq_all /= static_cast<double>(p.days());
      r.bond_all /= static_cast<double>(p.days());
      r.eq_stress /= std::max(1, ns);
      r.bond_stress /= std::max(1, ns);
      out.push_back(r);
    }
    return out;
  }();
  return runs;
}

Verdict template_stability() {
  const auto& runs = stress_runs();
  int stable = 0;
  double lo = 1.0;
  for (const auto& r : runs) {
    stable += r.agreement >= 0.9;
    lo = std::min(lo, r.agreement);
  }
  return {runs.front().agreement >= 0.9,
          fmt("agreement %.4f on the reference market; >= 90%% on %d/20 markets (worst %.3f)",
              runs.front().agreement, stable, lo)};
}

Verdict turnover_ordering() {
  int good = 0;
  double worst = 0.0, med;
  std::vector<double> ratios;
  for (const auto& r : stress_runs()) {
    good += r.turnover_ratio < 0.1;
    worst = std::max(worst, r.turnover_ratio);
    ratios.push_back(r.turnover_ratio);
  }
  std::sort(ratios.begin(), ratios.end());
  med = 0.5 * (ratios[9] + ratios[10]);
  return {good >= 16, fmt("%d/20 seeds with parametric/KNN turnover < 0.1 (median %.3f, worst %.3f)", good,
                          med, worst)};
}

Verdict crash_response() {
  int good = 0, bond = 0;
  for (const auto& r : stress_runs()) {
    good += r.eq_stress < r.eq_all;
    bond += r.bond_stress > r.bond_all;
  }
  return {good >= 16, fmt("%d/20 seeds with lower equity weight on stress days; defensive weight higher on "
                          "%d/20",
                          good, bond)};
}

// 10 ------------------------------------------------------------------------
PriceTable head_rows(const PriceTable& p, std::size_t rows) {
  PriceTable t;
  t.assets = p.assets;
  t.dates.assign(p.dates.begin(), p.dates.begin() + static_cast<std::ptrdiff_t>(rows));
  t.prices = p.prices.topRows(static_cast<Eigen::Index>(rows));
  return t;
}

std::map<std::string, BacktestResult> run_all(const PriceTable& p, const BacktestConfig& cfg) {
  const MarketData md = MarketData::from_prices(p, cfg.features);
  auto out = run_benchmarks(md, cfg);
  out.emplace("knn", run_knn(md, cfg));
  out.emplace("parametric", run_parametric(md, cfg));
  return out;
}

bool prefix_identical(const std::map<std::string, BacktestResult>& full,
                      const std::map<std::string, BacktestResult>& cut, std::string& why) {
  for (const auto& [name, c] : cut) {
    const BacktestResult& f = full.at(name);
    if (c.days() == 0 || c.days() >= f.days()) {
      why = name + ": truncated run not shorter";
      return false;
    }
    const auto d = static_cast<Eigen::Index>(c.days());
    for (std::size_t t = 0; t < c.days(); ++t)
      if (c.dates[t] != f.dates[t] || c.returns[t] != f.returns[t]) {
        why = name + ": return differs on " + c.dates[t].str();
        return false;
      }
    if (c.weights != f.weights.topRows(d)) {
      why = name + ": weights differ";
      return false;
    }
  }
  return true;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(WREG_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool replay_identical(const fs::path& config, const fs::path& work, std::string& why) {
  const fs::path a = work / "first", b = work / "replay";
  if (run_cli("run --config " + config.string() + " --out " + a.string()) != 0) {
    why = "first run failed";
    return false;
  }
  if (run_cli("run --config " + (a / "manifest.json").string() + " --out " + b.string()) != 0) {
    why = "replay failed";
    return false;
  }
  std::set<fs::path> files;
  for (const auto& root : {a, b})
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) files.insert(fs::relative(e.path(), root));
  if (files.size() < 10) {
    why = "too few artifacts";
    return false;
  }
  for (const auto& f : files) {
    if (f == "manifest.json") {
      auto ja = nlohmann::json::parse(slurp(a / f)), jb = nlohmann::json::parse(slurp(b / f));
      ja["run"].erase("out");
      jb["run"].erase("out");
      if (ja != jb) {
        why = "manifest differs";
        return false;
      }
    } else if (!fs::exists(a / f) || !fs::exists(b / f) || slurp(a / f) != slurp(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

Verdict causality_determinism() {
  const fs::path work = fixture::temp_dir("acceptance_c10");
  std::string notes;
  bool ok = true;

  // Synthetic fixture.
  {
    const SyntheticMarket m = generate(fixture::stress_market(), 900, 77);
    write_prices_csv(m.prices, (work / "synth.csv").string());
    BacktestConfig cfg;
    cfg.mvo.tau = 0.0002;
    cfg.order.select_every = 10;
    cfg.equity_asset = "EQ";
    const MarketData md = MarketData::from_prices(m.prices, cfg.features);
    cfg.split_date = md.features.dates[600];
    RunConfig rc;
    rc.prices = (work / "synth.csv").string();
    rc.backtest = cfg;
    std::ofstream(work / "synth.json") << to_json(rc).dump(2);

    std::string why;
    const bool trunc = prefix_identical(run_all(m.prices, cfg), run_all(head_rows(m.prices, 820), cfg), why);
    const bool replay = trunc && replay_identical(work / "synth.json", work / "synth_runs", why);
    ok = ok && trunc && replay;
    notes += fmt("synthetic: truncation %s, replay %s", trunc ? "ok" : "FAIL", replay ? "ok" : "FAIL");
    if (!why.empty()) notes += " (" + why + ")";
  }

  // Real CSV fixture.
  {
    const fs::path cfg_path = fs::path(WREG_SOURCE_DIR) / "configs" / "yahoo_monthly.json";
    const RunConfig rc = load_run_config(cfg_path.string());
    const PriceTable p = load_prices(rc.prices, rc.columns).table;
    std::string why;
    const bool trunc = prefix_identical(run_all(p, rc.backtest), run_all(head_rows(p, p.rows() - 24), rc.backtest), why);
    const bool replay = trunc && replay_identical(cfg_path, work / "yahoo_runs", why);
    ok = ok && trunc && replay;
    notes += fmt("; yahoo monthly: truncation %s, replay %s", trunc ? "ok" : "FAIL", replay ? "ok" : "FAIL");
    if (!why.empty()) notes += " (" + why + ")";
  }
  return {ok, notes};
}

// 11 ------------------------------------------------------------------------
Verdict metric_arithmetic() {
  std::vector<std::string> bad;
  auto check = [&](bool c, const char* what) {
    if (!c) bad.push_back(what);
  };
  Eigen::MatrixXd flip(2, 2);
  flip << 1, 0, 0, 1;
  check(turnover_series(flip)(1) == 1.0, "turnover full flip");
  check(turnover_series(Eigen::MatrixXd::Constant(4, 3, 0.25)).isZero(0.0), "turnover constant");
  Eigen::MatrixXd step(2, 2);
  step << 0.5, 0.5, 0.6, 0.4;
  // 0.6 - 0.5 is not 0.1 in binary; the hand value is the same arithmetic.
  check(turnover_series(step)(1) == 0.5 * ((0.6 - 0.5) + (0.5 - 0.4)), "turnover 0.1 step");
  check(std::abs(turnover_series(step)(1) - 0.1) < 1e-15, "turnover 0.1 step near 0.1");

  check(neff_series(Eigen::MatrixXd::Constant(1, 5, 0.2))(0) == 1.0 / (5 * (0.2 * 0.2)), "neff equal weight");
  check(std::abs(neff_series(Eigen::MatrixXd::Constant(1, 5, 0.2))(0) - 5.0) < 1e-14, "neff equal weight near 5");
  Eigen::MatrixXd w(2, 5);
  w << 0, 1, 0, 0, 0, 0.5, 0.5, 0, 0, 0;
  check(neff_series(w)(0) == 1.0, "neff one-hot");
  check(neff_series(w)(1) == 2.0, "neff two halves");

  const PerfReport c = perf_metrics(std::vector<double>(40, 0.0007));
  check(!c.sharpe.has_value(), "constant return Sharpe absent");
  check(c.max_drawdown == 0.0, "constant return drawdown");
  check(c.hit_rate == 1.0, "constant return hit rate");
  const PerfReport two = perf_metrics({0.01, -0.01});
  check(two.hit_rate == 0.5, "two-point hit rate");
  check(two.max_drawdown == -0.01, "two-point drawdown");

  std::string d = "11 examples";
  if (!bad.empty()) {
    d += "; failed:";
    for (const auto& b : bad) d += " [" + b + "]";
  }
  return {bad.empty(), d};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "W2 oracle suite", 10, w2_oracle},
      {2, "sqrtm reconstruction", 10, sqrtm_reconstruction},
      {3, "MVO optimality", 60, mvo_optimality},
      {4, "Ledoit-Wolf oracle", 10, ledoit_wolf_oracle},
      {5, "HMM recovery", 300, hmm_recovery},
      {6, "order selection sanity", 600, order_selection},
      {7, "template identity stability", 0, template_stability},
      {8, "turnover ordering", 0, turnover_ordering},
      {9, "crash response", 0, crash_response},
      {10, "causality and determinism", 0, causality_determinism},
      {11, "metric arithmetic", 0, metric_arithmetic},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      v.pass = false;
      v.detail += fmt("; runtime %.1f s exceeds %.0f s", secs, c.budget_s);
    }
    failures += !v.pass;
    std::printf("%s  [%2d] %-28s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
