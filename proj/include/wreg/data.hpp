#pragma once

// Price ingestion, log returns and the lagged feature matrix
// x_t = [r_{t-1}; sigma_{t-1}; m_{t-1}] used by both regime engines.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wreg/error.hpp"

namespace wreg {

/// Calendar date (day resolution) with ISO-8601 text form.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days d) : days_(d) {}
  Date(int y, unsigned m, unsigned d)
      : days_(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}}) {}

  static std::optional<Date> parse(std::string_view s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
      auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
      return r.ec == std::errc{} && r.ptr == s.data() + pos + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                    std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return Date{std::chrono::sys_days{ymd}};
  }

  std::string str() const {
    std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  std::chrono::sys_days days() const { return days_; }
  bool is_weekend() const {
    std::chrono::weekday wd{days_};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
  }
  Date next_day() const { return Date{days_ + std::chrono::days{1}}; }

  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

struct PriceTable {
  std::vector<Date> dates;
  std::vector<std::string> assets;
  Eigen::MatrixXd prices;  // T x N

  std::size_t rows() const { return dates.size(); }
  std::size_t n_assets() const { return assets.size(); }
};

/// Daily log returns; row t is dated at the later price of the pair.
struct ReturnTable {
  std::vector<Date> dates;
  std::vector<std::string> assets;
  Eigen::MatrixXd returns;  // (T-1) x N

  std::size_t rows() const { return dates.size(); }
  std::size_t n_assets() const { return assets.size(); }
};

struct FeatureConfig {
  int w_sigma = 60;
  int w_m = 20;

  int max_window() const { return std::max(w_sigma, w_m); }
  void validate() const {
    if (w_sigma < 2 || w_m < 2) throw ConfigError("feature windows must be >= 2");
  }
};

/// Row i holds the features dated `dates[i]`, built only from returns dated
/// strictly before it. `return_row[i]` is the ReturnTable row with the same
/// date, i.e. the return realized on the day the features are used.
struct FeatureMatrix {
  std::vector<Date> dates;
  std::vector<std::size_t> return_row;
  Eigen::MatrixXd values;  // rows x 3N, blocks [r | sigma | m]
  std::size_t n_assets = 0;

  std::size_t rows() const { return dates.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

struct LoadResult {
  PriceTable table;
  std::size_t dropped_rows = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw DataError("non-numeric price cell '" + s + "'");
  return v;
}

// Shifting by the first element keeps constant windows exactly constant.
inline double window_mean(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double base = x(0);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += x(i) - base;
  return base + acc / static_cast<double>(x.size());
}

inline double window_sample_std(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double base = x(0);
  const auto n = static_cast<double>(x.size());
  double mean_shift = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) mean_shift += x(i) - base;
  mean_shift /= n;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = (x(i) - base) - mean_shift;
    ss += d * d;
  }
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace detail

/// Parses `date,ASSET1,...` CSV. Rows with a blank or non-positive price are
/// dropped and counted. `columns` selects assets by name (empty = all).
inline LoadResult load_prices(const std::string& path,
                              const std::vector<std::string>& columns = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read price file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty price file: " + path);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw DataError("price file needs a date column and >= 1 asset");

  std::vector<std::size_t> pick;
  std::vector<std::string> assets;
  if (columns.empty()) {
    for (std::size_t j = 1; j < header.size(); ++j) {
      pick.push_back(j);
      assets.push_back(header[j]);
    }
  } else {
    for (const auto& c : columns) {
      auto it = std::find(header.begin() + 1, header.end(), c);
      if (it == header.end()) throw DataError("column '" + c + "' not found in " + path);
      pick.push_back(static_cast<std::size_t>(it - header.begin()));
      assets.push_back(c);
    }
  }

  std::vector<Date> dates;
  std::vector<std::vector<double>> rows;
  std::size_t dropped = 0;
  std::optional<Date> last;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    const auto cells = detail::split_csv_line(line);
    const auto date = Date::parse(cells.empty() ? std::string_view{} : cells[0]);
    if (!date) throw DataError("line " + std::to_string(line_no) + ": unparseable date");
    if (last && *date == *last)
      throw DataError("duplicate date " + date->str() + " at line " + std::to_string(line_no));
    if (last && *date < *last)
      throw DataError("dates not increasing at line " + std::to_string(line_no) + " (" +
                      date->str() + ")");
    last = date;

    std::vector<double> row;
    bool usable = true;
    for (auto j : pick) {
      std::optional<double> v;
      if (j < cells.size()) {
        try {
          v = detail::parse_double(cells[j]);
        } catch (const DataError& e) {
          throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      if (!v || !std::isfinite(*v) || *v <= 0.0) {
        usable = false;
        break;
      }
      row.push_back(*v);
    }
    if (!usable) {
      ++dropped;
      continue;
    }
    dates.push_back(*date);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("no usable rows in " + path);

  LoadResult out;
  out.dropped_rows = dropped;
  out.table.dates = std::move(dates);
  out.table.assets = std::move(assets);
  out.table.prices.resize(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(pick.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < pick.size(); ++j)
      out.table.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return out;
}

inline ReturnTable log_returns(const PriceTable& p) {
  if (p.rows() < 2) throw DataError("log_returns needs at least 2 price rows");
  const auto T = static_cast<Eigen::Index>(p.rows());
  ReturnTable r;
  r.assets = p.assets;
  r.dates.assign(p.dates.begin() + 1, p.dates.end());
  // Scalar log: the vectorized path rounds tail elements differently, so a
  // return's bits would depend on how many rows follow it.
  const Eigen::MatrixXd lp = p.prices.unaryExpr([](double v) { return std::log(v); });
  r.returns = lp.bottomRows(T - 1) - lp.topRows(T - 1);
  if (!r.returns.allFinite()) throw DataError("non-finite log return");
  return r;
}

/// Builds one feature row per return date t with at least max(w_sigma, w_m)
/// earlier returns; every slot uses returns dated <= t-1 only.
inline FeatureMatrix build_features(const ReturnTable& r, const FeatureConfig& cfg) {
  cfg.validate();
  const auto W = static_cast<std::size_t>(cfg.max_window());
  if (r.rows() < W + 1)
    throw DataError("insufficient history for features: need " + std::to_string(W + 1) +
                    " returns, have " + std::to_string(r.rows()));
  const auto N = static_cast<Eigen::Index>(r.n_assets());
  const std::size_t rows = r.rows() - W;

  FeatureMatrix f;
  f.n_assets = r.n_assets();
  f.values.resize(static_cast<Eigen::Index>(rows), 3 * N);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t t = W + i;
    f.dates.push_back(r.dates[t]);
    f.return_row.push_back(t);
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < N; ++j) {
      const auto col = r.returns.col(j);
      f.values(row, j) = col(static_cast<Eigen::Index>(t - 1));
      f.values(row, N + j) = detail::window_sample_std(
          col.segment(static_cast<Eigen::Index>(t) - cfg.w_sigma, cfg.w_sigma));
      f.values(row, 2 * N + j) =
          detail::window_mean(col.segment(static_cast<Eigen::Index>(t) - cfg.w_m, cfg.w_m));
    }
  }
  return f;
}

inline void write_features_csv(const FeatureMatrix& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "date";
  for (const char* block : {"r", "sigma", "m"})
    for (std::size_t j = 1; j <= f.n_assets; ++j) out << ',' << block << '_' << j;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < f.rows(); ++i) {
    out << f.dates[i].str();
    for (Eigen::Index j = 0; j < f.values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", f.values(static_cast<Eigen::Index>(i), j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

inline void write_prices_csv(const PriceTable& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "date";
  for (const auto& a : p.assets) out << ',' << a;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < p.rows(); ++i) {
    out << p.dates[i].str();
    for (Eigen::Index j = 0; j < p.prices.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", p.prices(static_cast<Eigen::Index>(i), j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace wreg
