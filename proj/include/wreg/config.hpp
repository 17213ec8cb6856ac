#pragma once

// JSON run configuration and synthetic-market specs. Every key is optional;
// absent keys take the library defaults and to_json writes all of them back,
// so a written config replays the same run.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "wreg/backtest.hpp"
#include "wreg/error.hpp"
#include "wreg/synthgen.hpp"

namespace wreg {

enum class Strategy { parametric, knn, benchmarks, all };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::parametric: return "parametric";
    case Strategy::knn: return "knn";
    case Strategy::benchmarks: return "benchmarks";
    case Strategy::all: return "all";
  }
  return "all";
}

inline std::optional<Strategy> parse_strategy(const std::string& s) {
  if (s == "parametric") return Strategy::parametric;
  if (s == "knn") return Strategy::knn;
  if (s == "benchmarks") return Strategy::benchmarks;
  if (s == "all") return Strategy::all;
  return std::nullopt;
}

struct RunConfig {
  std::string prices;                // input CSV
  std::vector<std::string> columns;  // asset subset; empty = every column
  std::string out = "run";
  Strategy strategy = Strategy::all;
  BacktestConfig backtest;
};

namespace detail {

using json = nlohmann::json;

/// Walks a JSON document, recording every problem instead of stopping at
/// the first one.
class Reader {
 public:
  std::vector<std::string> errors;

  void section(const json& root, const std::string& name, const std::set<std::string>& keys,
               const std::function<void(const json&)>& body) {
    if (!root.contains(name)) return;
    const json& s = root.at(name);
    if (!s.is_object()) {
      errors.push_back(name + ": expected an object");
      return;
    }
    for (const auto& [k, v] : s.items())
      if (!keys.count(k)) errors.push_back(name + "." + k + ": unknown key");
    prefix_ = name + ".";
    body(s);
    prefix_.clear();
  }

  void unknown_top_level(const json& root, const std::set<std::string>& allowed) {
    for (const auto& [k, v] : root.items())
      if (!allowed.count(k)) errors.push_back(k + ": unknown section");
  }

  void get(const json& s, const std::string& key, int& out) {
    if (!s.contains(key)) return;
    const json& v = s.at(key);
    if (v.is_number_integer()) out = v.get<int>();
    else errors.push_back(prefix_ + key + ": expected an integer");
  }
  void get(const json& s, const std::string& key, std::uint64_t& out) {
    if (!s.contains(key)) return;
    const json& v = s.at(key);
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))
      out = v.get<std::uint64_t>();
    else errors.push_back(prefix_ + key + ": expected a non-negative integer");
  }
  void get(const json& s, const std::string& key, double& out) {
    if (!s.contains(key)) return;
    const json& v = s.at(key);
    if (v.is_number()) out = v.get<double>();
    else errors.push_back(prefix_ + key + ": expected a number");
  }
  void get(const json& s, const std::string& key, bool& out) {
    if (!s.contains(key)) return;
    const json& v = s.at(key);
    if (v.is_boolean()) out = v.get<bool>();
    else errors.push_back(prefix_ + key + ": expected true or false");
  }
  void get(const json& s, const std::string& key, std::string& out) {
    if (!s.contains(key)) return;
    const json& v = s.at(key);
    if (v.is_string()) out = v.get<std::string>();
    else errors.push_back(prefix_ + key + ": expected a string");
  }
  void get(const json& s, const std::string& key, std::vector<std::string>& out) {
    if (!s.contains(key)) return;
    const json& v = s.at(key);
    bool ok = v.is_array();
    if (ok)
      for (const auto& e : v) ok = ok && e.is_string();
    if (ok) out = v.get<std::vector<std::string>>();
    else errors.push_back(prefix_ + key + ": expected an array of strings");
  }
  void get(const json& s, const std::string& key, Date& out) {
    std::string text;
    if (!s.contains(key)) return;
    get(s, key, text);
    if (!s.at(key).is_string()) return;
    if (auto d = Date::parse(text)) out = *d;
    else errors.push_back(prefix_ + key + ": expected a YYYY-MM-DD date");
  }

  void check(const std::function<void()>& validate) {
    try {
      validate();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  }

  void raise(const std::string& what) const {
    if (errors.empty()) return;
    std::string msg = what + ": " + std::to_string(errors.size()) + " problem(s)";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }

 private:
  std::string prefix_;
};

inline Eigen::VectorXd to_vector(const json& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  return out;
}

inline Eigen::MatrixXd to_matrix(const json& v) {
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(v[0].size()) : 0;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& r = v[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
      throw ConfigError("ragged matrix");
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = r[static_cast<std::size_t>(j)].get<double>();
  }
  return out;
}

inline json from_vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json from_matrix(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(from_vector(m.row(i).transpose()));
  return a;
}

inline bool numeric_array(const json& v) {
  if (!v.is_array()) return false;
  for (const auto& e : v)
    if (!e.is_number()) return false;
  return true;
}

inline bool numeric_matrix(const json& v) {
  if (!v.is_array()) return false;
  for (const auto& r : v)
    if (!numeric_array(r)) return false;
  return true;
}

}  // namespace detail

/// Parses a run configuration. `base_dir` resolves a relative input path.
/// Throws ConfigError listing every offending key.
inline RunConfig parse_run_config(const nlohmann::json& root,
                                  const std::filesystem::path& base_dir = {}) {
  detail::Reader rd;
  RunConfig rc;
  BacktestConfig& bt = rc.backtest;
  if (!root.is_object()) {
    rd.errors.push_back("top level: expected an object");
    rd.raise("config");
  }
  rd.unknown_top_level(root, {"data", "run", "features", "hmm", "templates", "knn", "optimizer",
                              "metrics", "manifest"});

  bool have_split = false;
  rd.section(root, "data", {"prices", "columns", "split_date", "equity_asset"},
             [&](const nlohmann::json& s) {
               rd.get(s, "prices", rc.prices);
               rd.get(s, "columns", rc.columns);
               rd.get(s, "split_date", bt.split_date);
               rd.get(s, "equity_asset", bt.equity_asset);
               have_split = s.contains("split_date");
             });
  rd.section(root, "run", {"strategy", "seed", "out"}, [&](const nlohmann::json& s) {
    std::string strategy = to_string(rc.strategy);
    rd.get(s, "strategy", strategy);
    if (auto st = parse_strategy(strategy)) rc.strategy = *st;
    else rd.errors.push_back("run.strategy: expected parametric, knn, benchmarks or all");
    rd.get(s, "seed", bt.seed);
    rd.get(s, "out", rc.out);
  });
  rd.section(root, "features", {"w_sigma", "w_m"}, [&](const nlohmann::json& s) {
    rd.get(s, "w_sigma", bt.features.w_sigma);
    rd.get(s, "w_m", bt.features.w_m);
  });
  rd.section(root, "hmm",
             {"k_min", "k_max", "select_every", "validation_len", "lambda_k", "max_iters", "tol",
              "ridge_scale", "lloyd_iters", "warm_start"},
             [&](const nlohmann::json& s) {
               rd.get(s, "k_min", bt.order.k_min);
               rd.get(s, "k_max", bt.order.k_max);
               rd.get(s, "select_every", bt.order.select_every);
               rd.get(s, "validation_len", bt.order.validation_len);
               rd.get(s, "lambda_k", bt.order.lambda_k);
               rd.get(s, "max_iters", bt.em.max_iters);
               rd.get(s, "tol", bt.em.tol);
               rd.get(s, "ridge_scale", bt.em.ridge_scale);
               rd.get(s, "lloyd_iters", bt.em.lloyd_iters);
               rd.get(s, "warm_start", bt.warm_start);
             });
  rd.section(root, "templates", {"count", "eta", "calibration_len"}, [&](const nlohmann::json& s) {
    rd.get(s, "count", bt.templates.count);
    rd.get(s, "eta", bt.templates.eta);
    rd.get(s, "calibration_len", bt.templates.calibration_len);
  });
  rd.section(root, "knn", {"neighbors", "min_history", "standardize"}, [&](const nlohmann::json& s) {
    rd.get(s, "neighbors", bt.knn.neighbors);
    rd.get(s, "min_history", bt.knn.min_history);
    rd.get(s, "standardize", bt.knn.standardize);
  });
  rd.section(root, "optimizer", {"gamma", "tau", "w_max"}, [&](const nlohmann::json& s) {
    rd.get(s, "gamma", bt.mvo.gamma);
    rd.get(s, "tau", bt.mvo.tau);
    rd.get(s, "w_max", bt.mvo.w_max);
  });
  rd.section(root, "metrics", {"periods_per_year", "risk_free"}, [&](const nlohmann::json& s) {
    rd.get(s, "periods_per_year", bt.perf.periods_per_year);
    rd.get(s, "risk_free", bt.perf.risk_free);
  });

  if (rc.prices.empty()) rd.errors.push_back("data.prices: required");
  if (!have_split) rd.errors.push_back("data.split_date: required");
  rd.check([&] { bt.features.validate(); });
  rd.check([&] { bt.order.validate(); });
  rd.check([&] { bt.templates.validate(); });
  rd.check([&] { bt.knn.validate(bt.features.max_window()); });
  if (bt.em.max_iters < 1) rd.errors.push_back("hmm.max_iters: must be >= 1");
  if (!(bt.em.tol > 0.0)) rd.errors.push_back("hmm.tol: must be > 0");
  if (!(bt.em.ridge_scale > 0.0)) rd.errors.push_back("hmm.ridge_scale: must be > 0");
  if (bt.em.lloyd_iters < 0) rd.errors.push_back("hmm.lloyd_iters: must be >= 0");
  if (!(bt.mvo.gamma > 0.0)) rd.errors.push_back("optimizer.gamma: must be > 0");
  if (!(bt.mvo.tau >= 0.0)) rd.errors.push_back("optimizer.tau: must be >= 0");
  if (!(bt.mvo.w_max > 0.0 && bt.mvo.w_max <= 1.0))
    rd.errors.push_back("optimizer.w_max: must be in (0, 1]");
  if (!(bt.perf.periods_per_year > 0.0)) rd.errors.push_back("metrics.periods_per_year: must be > 0");
  rd.raise("config");

  if (!base_dir.empty() && std::filesystem::path(rc.prices).is_relative())
    rc.prices = (base_dir / rc.prices).lexically_normal().string();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_run_config(root, std::filesystem::absolute(path).parent_path());
}

/// Every effective parameter, defaults included.
inline nlohmann::json to_json(const RunConfig& rc) {
  const BacktestConfig& bt = rc.backtest;
  nlohmann::json j;
  j["data"] = {{"prices", rc.prices},
               {"columns", rc.columns},
               {"split_date", bt.split_date.str()},
               {"equity_asset", bt.equity_asset}};
  j["run"] = {{"strategy", to_string(rc.strategy)}, {"seed", bt.seed}, {"out", rc.out}};
  j["features"] = {{"w_sigma", bt.features.w_sigma}, {"w_m", bt.features.w_m}};
  j["hmm"] = {{"k_min", bt.order.k_min},
              {"k_max", bt.order.k_max},
              {"select_every", bt.order.select_every},
              {"validation_len", bt.order.validation_len},
              {"lambda_k", bt.order.lambda_k},
              {"max_iters", bt.em.max_iters},
              {"tol", bt.em.tol},
              {"ridge_scale", bt.em.ridge_scale},
              {"lloyd_iters", bt.em.lloyd_iters},
              {"warm_start", bt.warm_start}};
  j["templates"] = {{"count", bt.templates.count},
                    {"eta", bt.templates.eta},
                    {"calibration_len", bt.templates.calibration_len}};
  j["knn"] = {{"neighbors", bt.knn.neighbors},
              {"min_history", bt.knn.min_history},
              {"standardize", bt.knn.standardize}};
  j["optimizer"] = {{"gamma", bt.mvo.gamma}, {"tau", bt.mvo.tau}, {"w_max", bt.mvo.w_max}};
  j["metrics"] = {{"periods_per_year", bt.perf.periods_per_year},
                  {"risk_free", bt.perf.risk_free}};
  return j;
}

/// Regime spec format:
///   {"assets": [...], "regimes": [{"mean": [...], "covariance": [[...], ...]}, ...],
///    "transition": [[...], ...], "initial_state": 0, "start_date": "2010-01-04"}
inline RegimeSpec parse_regime_spec(const nlohmann::json& root) {
  detail::Reader rd;
  RegimeSpec spec;
  if (!root.is_object()) {
    rd.errors.push_back("top level: expected an object");
    rd.raise("regime spec");
  }
  rd.unknown_top_level(root, {"assets", "regimes", "transition", "initial_state", "start_date"});
  rd.get(root, "assets", spec.assets);
  rd.get(root, "initial_state", spec.initial_state);
  rd.get(root, "start_date", spec.start_date);
  if (!root.contains("assets")) rd.errors.push_back("assets: required");

  if (!root.contains("regimes") || !root.at("regimes").is_array() || root.at("regimes").empty()) {
    rd.errors.push_back("regimes: expected a non-empty array");
  } else {
    const auto& regs = root.at("regimes");
    for (std::size_t k = 0; k < regs.size(); ++k) {
      const std::string at = "regimes[" + std::to_string(k) + "]";
      const auto& r = regs[k];
      if (!r.is_object()) {
        rd.errors.push_back(at + ": expected an object");
        continue;
      }
      for (const auto& [key, v] : r.items())
        if (key != "mean" && key != "covariance") rd.errors.push_back(at + "." + key + ": unknown key");
      if (!r.contains("mean") || !detail::numeric_array(r.at("mean")))
        rd.errors.push_back(at + ".mean: expected an array of numbers");
      else
        spec.means.push_back(detail::to_vector(r.at("mean")));
      if (!r.contains("covariance") || !detail::numeric_matrix(r.at("covariance"))) {
        rd.errors.push_back(at + ".covariance: expected a matrix of numbers");
      } else {
        try {
          spec.covariances.push_back(detail::to_matrix(r.at("covariance")));
        } catch (const ConfigError&) {
          rd.errors.push_back(at + ".covariance: rows of unequal length");
        }
      }
    }
  }
  if (!root.contains("transition") || !detail::numeric_matrix(root.at("transition"))) {
    rd.errors.push_back("transition: expected a matrix of numbers");
  } else {
    try {
      spec.transition = detail::to_matrix(root.at("transition"));
    } catch (const ConfigError&) {
      rd.errors.push_back("transition: rows of unequal length");
    }
  }
  if (rd.errors.empty()) rd.check([&] { spec.validate(); });
  rd.raise("regime spec");
  return spec;
}

inline RegimeSpec load_regime_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read regime spec: " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("regime spec " + path + ": " + e.what());
  }
  return parse_regime_spec(root);
}

inline nlohmann::json to_json(const RegimeSpec& spec) {
  nlohmann::json regs = nlohmann::json::array();
  for (std::size_t k = 0; k < spec.means.size(); ++k)
    regs.push_back({{"mean", detail::from_vector(spec.means[k])},
                    {"covariance", detail::from_matrix(spec.covariances[k])}});
  return {{"assets", spec.assets},
          {"regimes", regs},
          {"transition", detail::from_matrix(spec.transition)},
          {"initial_state", spec.initial_state},
          {"start_date", spec.start_date.str()}};
}

}  // namespace wreg
