#pragma once

// Run-directory artifacts: per-strategy CSVs, perf.json, manifest.json, and
// the summary report rendered back from those files.
//
//   <out>/manifest.json   effective config + input digests (replayable)
//   <out>/perf.json       gross and net PerfReports per strategy
//   <out>/<strategy>/     weights, returns, diagnostics and engine logs
//   <out>/report.txt, report.json   written by render_report

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "wreg/backtest.hpp"
#include "wreg/config.hpp"
#include "wreg/error.hpp"
#include "wreg/metrics.hpp"

#ifndef WREG_VERSION
#define WREG_VERSION "0.0.0"
#endif

namespace wreg {

namespace fs = std::filesystem;

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

inline nlohmann::json perf_json(const PerfReport& p) {
  nlohmann::json j;
  j["days"] = p.days;
  j["ann_mean"] = p.ann_mean;
  j["ann_vol"] = p.ann_vol;
  j["sharpe"] = p.sharpe ? nlohmann::json(*p.sharpe) : nlohmann::json(nullptr);
  j["sortino"] = p.sortino ? nlohmann::json(*p.sortino) : nlohmann::json(nullptr);
  j["max_drawdown"] = p.max_drawdown;
  j["hit_rate"] = p.hit_rate;
  j["cumulative_log_return"] = p.cumulative_log_return;
  return j;
}

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

}  // namespace detail

/// Writes one strategy's files into `dir`.
inline void write_result(const BacktestResult& r, const Eigen::MatrixXd& oos_asset_returns,
                         const PerfConfig& perf, const fs::path& dir) {
  fs::create_directories(dir);
  using detail::num;
  {
    auto out = detail::open_out(dir / "weights.csv");
    out << "date";
    for (const auto& a : r.assets) out << ',' << a;
    out << '\n';
    for (std::size_t t = 0; t < r.days(); ++t) {
      out << r.dates[t].str();
      for (Eigen::Index j = 0; j < r.weights.cols(); ++j)
        out << ',' << num(r.weights(static_cast<Eigen::Index>(t), j));
      out << '\n';
    }
  }
  {
    auto out = detail::open_out(dir / "returns.csv");
    out << "date,gross,net\n";
    for (std::size_t t = 0; t < r.days(); ++t)
      out << r.dates[t].str() << ',' << num(r.returns[t]) << ',' << num(r.net_returns[t]) << '\n';
  }
  {
    auto out = detail::open_out(dir / "diagnostics.csv");
    out << "date,turnover,neff,K_t,g_t\n";
    for (std::size_t t = 0; t < r.days(); ++t) {
      const auto i = static_cast<Eigen::Index>(t);
      out << r.dates[t].str() << ',' << num(r.turnover(i)) << ',' << num(r.neff(i)) << ',';
      if (!r.regime_count.empty()) out << r.regime_count[t];
      out << ',';
      if (!r.dominant.empty() && r.dominant[t] >= 0) out << r.dominant[t];
      out << '\n';
    }
  }
  {
    auto out = detail::open_out(dir / "solver_log.csv");
    out << "date,objective,kkt_residual,turnover,binding_caps\n";
    for (const auto& s : r.solves)
      out << s.date.str() << ',' << num(s.objective) << ',' << num(s.kkt_residual) << ','
          << num(s.turnover) << ',' << s.binding_caps << '\n';
  }
  {
    auto out = detail::open_out(dir / "events.csv");
    out << "date,stage,message\n";
    for (const auto& h : r.holds) {
      std::string msg = h.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << h.date.str() << ',' << h.stage << ',' << msg << '\n';
    }
  }
  if (!r.scores.empty()) {
    auto out = detail::open_out(dir / "hmm_scores.csv");
    out << "date,K,predll,complexity,score,selected\n";
    for (const auto& s : r.scores)
      out << s.date.str() << ',' << s.K << ',' << (s.error.empty() ? num(s.predll) : "") << ','
          << num(s.complexity) << ',' << (s.error.empty() ? num(s.score) : "") << ','
          << (s.selected ? 1 : 0) << '\n';
  }
  if (!r.templates.empty()) {
    auto out = detail::open_out(dir / "templates.csv");
    out << "date,g,p_tg";
    const Eigen::Index d = r.templates.front().mu.size();
    for (Eigen::Index j = 1; j <= d; ++j) out << ",mu_" << j;
    out << ",trace_sigma_g\n";
    for (const auto& tr : r.templates) {
      out << tr.date.str() << ',' << tr.label << ',' << num(tr.prob);
      for (Eigen::Index j = 0; j < tr.mu.size(); ++j) out << ',' << num(tr.mu(j));
      out << ',' << num(tr.trace_sigma) << '\n';
    }
  }
  if (!r.neighbors.empty()) {
    auto out = detail::open_out(dir / "knn_neighbors.csv");
    const std::size_t k = r.neighbors.front().neighbor_dates.size();
    out << "date";
    for (std::size_t j = 1; j <= k; ++j) out << ",neighbor_date_" << j;
    for (std::size_t j = 1; j <= k; ++j) out << ",distance_" << j;
    out << '\n';
    for (const auto& nr : r.neighbors) {
      out << nr.date.str();
      for (const auto& d : nr.neighbor_dates) out << ',' << d.str();
      for (double d : nr.distances) out << ',' << num(d);
      out << '\n';
    }
  }
  if (!r.dominant.empty()) {
    std::vector<int> labels;
    std::vector<double> port;
    std::vector<Eigen::Index> rows;
    for (std::size_t t = 0; t < r.days(); ++t) {
      if (r.dominant[t] < 0) continue;
      labels.push_back(r.dominant[t]);
      port.push_back(r.returns[t]);
      rows.push_back(static_cast<Eigen::Index>(t));
    }
    auto out = detail::open_out(dir / "regime_attribution.csv");
    out << "label,days,ann_mean,ann_vol,sharpe,sortino,hit_rate,max_dd_within";
    for (const auto& a : r.assets) out << ",sharpe_" << a;
    out << '\n';
    if (!labels.empty()) {
      Eigen::MatrixXd ar(static_cast<Eigen::Index>(rows.size()), oos_asset_returns.cols());
      for (std::size_t i = 0; i < rows.size(); ++i)
        ar.row(static_cast<Eigen::Index>(i)) = oos_asset_returns.row(rows[i]);
      const RegimeAttribution att = regime_attribution(labels, port, ar, perf);
      for (const auto& [g, p] : att.portfolio) {
        out << g << ',' << p.days << ',' << num(p.ann_mean) << ',' << num(p.ann_vol) << ','
            << detail::opt_num(p.sharpe) << ',' << detail::opt_num(p.sortino) << ','
            << num(p.hit_rate) << ',' << num(p.max_drawdown);
        for (const auto& s : att.asset_sharpe.at(g)) out << ',' << detail::opt_num(s);
        out << '\n';
      }
    }
  }
}

struct InputDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Writes every strategy directory plus perf.json and manifest.json.
inline void write_run(const RunConfig& rc, const std::map<std::string, BacktestResult>& results,
                      const MarketData& md, const std::vector<InputDigest>& inputs,
                      std::size_t dropped_rows, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  nlohmann::json perf = nlohmann::json::object();
  for (const auto& [name, r] : results) {
    const Eigen::MatrixXd oos =
        md.aligned_returns.bottomRows(static_cast<Eigen::Index>(r.days()));
    write_result(r, oos, rc.backtest.perf, out_dir / name);
    perf[name] = {{"gross", detail::perf_json(perf_metrics(r.returns, rc.backtest.perf))},
                  {"net", detail::perf_json(perf_metrics(r.net_returns, rc.backtest.perf))},
                  {"holds", r.holds.size()}};
  }
  {
    auto out = detail::open_out(out_dir / "perf.json");
    out << perf.dump(2) << '\n';
  }

  nlohmann::json manifest = to_json(rc);
  nlohmann::json ins = nlohmann::json::array();
  for (const auto& d : inputs) ins.push_back({{"path", d.path}, {"sha256", d.sha256}, {"bytes", d.bytes}});
  nlohmann::json strategies = nlohmann::json::array();
  for (const auto& [name, r] : results) strategies.push_back(name);
  manifest["manifest"] = {{"version", WREG_VERSION},
                          {"seed", rc.backtest.seed},
                          {"inputs", ins},
                          {"dropped_rows", dropped_rows},
                          {"assets", md.returns.assets},
                          {"strategies", strategies}};
  if (!results.empty()) {
    const auto& any = results.begin()->second;
    if (any.days() > 0)
      manifest["manifest"]["oos"] = {{"first", any.dates.front().str()},
                                     {"last", any.dates.back().str()},
                                     {"days", any.days()}};
  }
  auto out = detail::open_out(out_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Report rendering from stored artifacts.

struct TurnoverStats {
  double average = 0.0;
  double q95 = 0.0;
  double share_above_1pct = 0.0;
  double share_above_5pct = 0.0;
};

struct ConcentrationStats {
  double average = 0.0;
  double median = 0.0;
};

/// Linear-interpolation quantile (closest ranks blended), q in [0, 1].
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile of an empty series");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline TurnoverStats turnover_stats(const std::vector<double>& to) {
  if (to.empty()) throw std::invalid_argument("turnover_stats: empty series");
  TurnoverStats s;
  double n1 = 0.0, n5 = 0.0, sum = 0.0;
  for (double v : to) {
    sum += v;
    n1 += v > 0.01 ? 1.0 : 0.0;
    n5 += v > 0.05 ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(to.size());
  s.average = sum / n;
  s.q95 = quantile(to, 0.95);
  s.share_above_1pct = n1 / n;
  s.share_above_5pct = n5 / n;
  return s;
}

inline ConcentrationStats concentration_stats(const std::vector<double>& neff) {
  if (neff.empty()) throw std::invalid_argument("concentration_stats: empty series");
  ConcentrationStats s;
  double sum = 0.0;
  for (double v : neff) sum += v;
  s.average = sum / static_cast<double>(neff.size());
  s.median = quantile(neff, 0.5);
  return s;
}

namespace detail {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const fs::path& file) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(file.string() + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
  std::vector<double> numbers(const std::string& name, const fs::path& file) const {
    const std::size_t c = column(name, file);
    std::vector<double> out;
    for (const auto& r : rows) {
      double v = 0.0;
      const std::string& s = c < r.size() ? r[c] : std::string{};
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || res.ec != std::errc{})
        throw DataError(file.string() + ": bad number '" + s + "' in column " + name);
      out.push_back(v);
    }
    return out;
  }
};

inline Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("missing artifact " + p.string());
  Csv c;
  std::string line;
  if (std::getline(in, line)) c.header = split_csv_line(line);
  while (std::getline(in, line))
    if (!line.empty()) c.rows.push_back(split_csv_line(line));
  return c;
}

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("missing artifact " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

inline std::string fixed(double v, int prec = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

inline std::string fixed(const nlohmann::json& v, int prec = 4) {
  return v.is_number() ? fixed(v.get<double>(), prec) : std::string("n/a");
}

inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string row(const std::string& label, const std::vector<std::string>& cells,
                       std::size_t lw = 28, std::size_t cw = 14) {
  std::string out = label + std::string(label.size() < lw ? lw - label.size() : 1, ' ');
  for (const auto& c : cells) out += pad(c, cw);
  return out + "\n";
}

}  // namespace detail

/// Builds report.txt and report.json in `run_dir` from the stored files.
/// Returns the JSON summary.
inline nlohmann::json render_report(const fs::path& run_dir) {
  using detail::fixed;
  const nlohmann::json manifest = detail::read_json(run_dir / "manifest.json");
  const nlohmann::json perf = detail::read_json(run_dir / "perf.json");
  if (!manifest.contains("manifest") || !manifest["manifest"].contains("strategies"))
    throw DataError((run_dir / "manifest.json").string() + ": no strategy list");

  const auto order = std::vector<std::string>{"parametric", "knn", "buy_and_hold", "equal_weight"};
  std::vector<std::string> names;
  for (const auto& n : order)
    for (const auto& s : manifest["manifest"]["strategies"])
      if (s.get<std::string>() == n) names.push_back(n);

  nlohmann::json rep;
  rep["strategies"] = names;
  for (const auto& name : names) {
    const fs::path dir = run_dir / name;
    const auto diag = detail::read_csv(dir / "diagnostics.csv");
    const auto to = turnover_stats(diag.numbers("turnover", dir / "diagnostics.csv"));
    const auto ne = concentration_stats(diag.numbers("neff", dir / "diagnostics.csv"));
    if (!perf.contains(name)) throw DataError("perf.json has no entry for " + name);
    nlohmann::json s;
    s["turnover"] = {{"average_daily", to.average},
                     {"quantile_95", to.q95},
                     {"share_days_above_1pct", to.share_above_1pct},
                     {"share_days_above_5pct", to.share_above_5pct}};
    s["concentration"] = {{"average_neff", ne.average}, {"median_neff", ne.median}};
    s["performance"] = perf[name];
    if (fs::exists(dir / "regime_attribution.csv")) {
      const auto att = detail::read_csv(dir / "regime_attribution.csv");
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : att.rows) {
        nlohmann::json o;
        for (std::size_t c = 0; c < att.header.size(); ++c) {
          const std::string cell = c < r.size() ? r[c] : "";
          double v = 0.0;
          auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
          o[att.header[c]] = (!cell.empty() && res.ec == std::errc{}) ? nlohmann::json(v)
                                                                      : nlohmann::json(nullptr);
        }
        rows.push_back(o);
      }
      s["regime_attribution"] = rows;
    }
    rep["results"][name] = s;
  }

  std::ostringstream txt;
  txt << "Run " << manifest["data"]["prices"].get<std::string>() << "  split "
      << manifest["data"]["split_date"].get<std::string>() << "  seed "
      << manifest["run"]["seed"].dump() << "\n";
  if (manifest["manifest"].contains("oos"))
    txt << "Out-of-sample " << manifest["manifest"]["oos"]["first"].get<std::string>() << " to "
        << manifest["manifest"]["oos"]["last"].get<std::string>() << " ("
        << manifest["manifest"]["oos"]["days"].dump() << " days)\n";

  txt << "\nPerformance comparison (gross)\n";
  txt << detail::row("", names);
  const auto perf_row = [&](const std::string& label, const std::string& key, int prec) {
    std::vector<std::string> cells;
    for (const auto& n : names) cells.push_back(fixed(perf[n]["gross"][key], prec));
    txt << detail::row(label, cells);
  };
  perf_row("Ann. mean", "ann_mean", 4);
  perf_row("Ann. volatility", "ann_vol", 4);
  perf_row("Sharpe", "sharpe", 2);
  perf_row("Sortino", "sortino", 2);
  perf_row("Max drawdown", "max_drawdown", 4);
  perf_row("Hit rate", "hit_rate", 3);
  perf_row("Cumulative log return", "cumulative_log_return", 4);
  {
    std::vector<std::string> cells;
    for (const auto& n : names) cells.push_back(fixed(perf[n]["net"]["sharpe"], 2));
    txt << detail::row("Sharpe (net of costs)", cells);
  }

  txt << "\nRebalancing and turnover\n";
  txt << detail::row("", names);
  const auto stat_row = [&](const std::string& label, const std::string& group,
                            const std::string& key, int prec) {
    std::vector<std::string> cells;
    for (const auto& n : names) cells.push_back(fixed(rep["results"][n][group][key], prec));
    txt << detail::row(label, cells);
  };
  stat_row("Average daily turnover", "turnover", "average_daily", 4);
  stat_row("95% turnover quantile", "turnover", "quantile_95", 4);
  stat_row("Days with >1% turnover", "turnover", "share_days_above_1pct", 3);
  stat_row("Days with >5% turnover", "turnover", "share_days_above_5pct", 3);
  txt << "\nConcentration\n";
  txt << detail::row("", names);
  stat_row("Average N_eff", "concentration", "average_neff", 2);
  stat_row("Median N_eff", "concentration", "median_neff", 2);

  for (const auto& n : names) {
    if (!rep["results"][n].contains("regime_attribution") ||
        rep["results"][n]["regime_attribution"].empty())
      continue;
    txt << "\nPerformance by regime (" << n << ", dominant template label)\n";
    txt << detail::row("Label", {"Days", "Ann mean", "Ann vol", "Sharpe", "Hit rate", "Max DD"}, 8,
                       11);
    for (const auto& r : rep["results"][n]["regime_attribution"]) {
      txt << detail::row(fixed(r["label"], 0),
                         {fixed(r["days"], 0), fixed(r["ann_mean"]), fixed(r["ann_vol"]),
                          fixed(r["sharpe"], 2), fixed(r["hit_rate"], 3),
                          fixed(r["max_dd_within"])},
                         8, 11);
    }
    std::vector<std::string> assets;
    const auto& first = rep["results"][n]["regime_attribution"][0];
    if (manifest["manifest"].contains("assets"))
      for (const auto& a : manifest["manifest"]["assets"])
        if (first.contains("sharpe_" + a.get<std::string>()))
          assets.push_back("sharpe_" + a.get<std::string>());
    if (assets.empty()) continue;
    txt << "\nAsset Sharpe by regime (" << n << ")\n";
    std::vector<std::string> head;
    for (const auto& a : assets) head.push_back(a.substr(7));
    txt << detail::row("Label", head, 8, 11);
    for (const auto& r : rep["results"][n]["regime_attribution"]) {
      std::vector<std::string> cells;
      for (const auto& a : assets) cells.push_back(fixed(r[a], 2));
      txt << detail::row(fixed(r["label"], 0), cells, 8, 11);
    }
  }
  txt << "\nEqual-weight returns use the mean of asset log returns (no rebalancing drift).\n"
         "Net figures charge 2 * tau per unit of turnover.\n";

  {
    auto out = detail::open_out(run_dir / "report.txt");
    out << txt.str();
  }
  {
    auto out = detail::open_out(run_dir / "report.json");
    out << rep.dump(2) << '\n';
  }
  return rep;
}

}  // namespace wreg
