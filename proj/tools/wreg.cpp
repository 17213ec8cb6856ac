// wreg: run backtests, generate synthetic markets, render reports.
//
//   wreg run --config run.json [--strategy all] [--seed 42] [--out dir]
//   wreg synth --spec regimes.json --T 2000 --seed 1 --out dir
//   wreg report dir
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "wreg/backtest.hpp"
#include "wreg/config.hpp"
#include "wreg/report.hpp"
#include "wreg/synthgen.hpp"

namespace fs = std::filesystem;
using namespace wreg;

namespace {

int cmd_run(const std::string& config_path, const std::optional<std::string>& strategy,
            const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out) {
  RunConfig rc = load_run_config(config_path);
  if (strategy) {
    auto s = parse_strategy(*strategy);
    if (!s) throw ConfigError("--strategy: expected parametric, knn, benchmarks or all");
    rc.strategy = *s;
  }
  if (seed) rc.backtest.seed = *seed;
  if (out) rc.out = *out;

  const LoadResult loaded = load_prices(rc.prices, rc.columns);
  if (loaded.dropped_rows > 0)
    std::cerr << "dropped " << loaded.dropped_rows << " row(s) with missing or non-positive prices\n";
  rc.backtest.features.validate();
  const MarketData md = MarketData::from_prices(loaded.table, rc.backtest.features);

  std::map<std::string, BacktestResult> results;
  const bool all = rc.strategy == Strategy::all;
  if (all || rc.strategy == Strategy::benchmarks)
    for (auto& [name, r] : run_benchmarks(md, rc.backtest)) results.emplace(name, std::move(r));
  if (all || rc.strategy == Strategy::knn) results.emplace("knn", run_knn(md, rc.backtest));
  if (all || rc.strategy == Strategy::parametric)
    results.emplace("parametric", run_parametric(md, rc.backtest));

  InputDigest digest{rc.prices, sha256_file(rc.prices), fs::file_size(rc.prices)};
  write_run(rc, results, md, {digest}, loaded.dropped_rows, rc.out);

  for (const auto& [name, r] : results) {
    const PerfReport p = perf_metrics(r.returns, rc.backtest.perf);
    std::printf("%-14s days %5zu  ann_mean %8.4f  ann_vol %7.4f  sharpe %6s  max_dd %8.4f  "
                "avg_turnover %.5f  holds %zu\n",
                name.c_str(), p.days, p.ann_mean, p.ann_vol,
                p.sharpe ? std::to_string(*p.sharpe).substr(0, 6).c_str() : "n/a",
                p.max_drawdown, r.turnover.size() ? r.turnover.mean() : 0.0, r.holds.size());
  }
  std::printf("wrote %s\n", rc.out.c_str());
  return 0;
}

int cmd_synth(const std::string& spec_path, int T, std::uint64_t seed, const std::string& out) {
  const RegimeSpec spec = load_regime_spec(spec_path);
  const SyntheticMarket m = generate(spec, T, seed);
  fs::create_directories(out);
  write_prices_csv(m.prices, (fs::path(out) / "prices.csv").string());
  std::ofstream labels(fs::path(out) / "true_labels.csv");
  if (!labels) throw DataError("cannot write " + (fs::path(out) / "true_labels.csv").string());
  labels << "date,regime\n";
  for (std::size_t t = 0; t < m.labels.size(); ++t)
    labels << m.prices.dates[t + 1].str() << ',' << m.labels[t] << '\n';
  std::printf("wrote %s (%d prices, %zu labels)\n", out.c_str(), T, m.labels.size());
  return 0;
}

int cmd_report(const std::string& dir) {
  render_report(dir);
  std::ifstream in(fs::path(dir) / "report.txt");
  std::cout << in.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-aware portfolio backtester"};
  app.set_version_flag("--version", WREG_VERSION);
  app.require_subcommand(1);

  std::string config_path, spec_path, out_dir, run_dir;
  std::string strategy;
  std::uint64_t seed = 0;
  std::optional<std::string> run_strategy, run_out;
  std::optional<std::uint64_t> run_seed;
  int T = 0;

  auto* run = app.add_subcommand("run", "run backtests from a config file");
  run->add_option("--config", config_path, "JSON run config")->required();
  run->add_option("--strategy", run_strategy, "parametric | knn | benchmarks | all");
  run->add_option("--seed", run_seed, "master seed (overrides the config)");
  run->add_option("--out", run_out, "output directory (overrides the config)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic regime-switching market");
  synth->add_option("--spec", spec_path, "JSON regime spec")->required();
  synth->add_option("--T", T, "number of price rows")->required();
  synth->add_option("--seed", seed, "sampling seed")->required();
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("run_dir", run_dir, "directory written by `run`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config_path, run_strategy, run_seed, run_out);
    if (*synth) return cmd_synth(spec_path, T, seed, out_dir);
    if (*report) return cmd_report(run_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
