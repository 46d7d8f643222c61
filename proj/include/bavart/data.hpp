#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bavart/error.hpp"

namespace bavart {

/// T x M panel: rows are time, columns are variables.
struct TimeSeriesMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> names;
  std::string frequency;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  void validate() const {
    if (static_cast<Eigen::Index>(names.size()) != values.cols())
      throw runtime_error("data.names", "column name count does not match data width");
    if (values.rows() < 2) throw runtime_error("data.rows", "time series needs at least 2 rows");
    std::set<std::string> seen(names.begin(), names.end());
    if (seen.size() != names.size())
      throw runtime_error("data.names", "column names must be unique");
    if (!values.allFinite()) throw runtime_error("data.values", "time series contains non-finite values");
  }

  /// Columns reordered (and possibly subset) according to `order`.
  TimeSeriesMatrix select(const std::vector<std::string>& order) const {
    TimeSeriesMatrix out;
    out.frequency = frequency;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t j = 0; j < order.size(); ++j) {
      auto it = std::find(names.begin(), names.end(), order[j]);
      if (it == names.end())
        throw config_error("model.ordering", "unknown variable in ordering: " + order[j]);
      out.values.col(static_cast<Eigen::Index>(j)) = values.col(it - names.begin());
      out.names.push_back(order[j]);
    }
    return out;
  }

  /// First `n` rows.
  TimeSeriesMatrix head(Eigen::Index n) const {
    return TimeSeriesMatrix{values.topRows(n), names, frequency};
  }

  /// First differences; loses the first row.
  TimeSeriesMatrix diff() const {
    const Eigen::Index t = values.rows();
    return TimeSeriesMatrix{values.bottomRows(t - 1) - values.topRows(t - 1), names, frequency};
  }
};

namespace detail {

// Split one CSV record, honouring double quotes ("" escapes a quote).
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline TimeSeriesMatrix parse_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw runtime_error("data.header", source + ": empty file, header row required");
  TimeSeriesMatrix out;
  for (auto& name : detail::split_csv_line(line)) out.names.emplace_back(detail::trim(name));

  const std::size_t width = out.names.size();
  std::vector<double> cells;
  std::size_t row = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != width)
      throw runtime_error("data.ragged", source + ": line " + std::to_string(lineno) + " has " +
                                             std::to_string(fields.size()) + " fields, expected " +
                                             std::to_string(width));
    for (std::size_t j = 0; j < width; ++j) {
      double v;
      if (!detail::parse_double(fields[j], v))
        throw runtime_error("data.cell", source + ": non-numeric cell at row " + std::to_string(row + 1) +
                                             ", column " + std::to_string(j + 1) + " (" + out.names[j] +
                                             "): '" + fields[j] + "'");
      cells.push_back(v);
    }
    ++row;
  }
  if (row < 2) throw runtime_error("data.rows", source + ": at least 2 data rows required");
  out.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      cells.data(), static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(width));
  out.validate();
  return out;
}

inline TimeSeriesMatrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw runtime_error("data.path", "cannot open data file: " + path);
  return parse_csv(in, path);
}

inline void write_csv(std::ostream& out, const TimeSeriesMatrix& y) {
  for (std::size_t j = 0; j < y.names.size(); ++j) out << (j ? "," : "") << csv_quote(y.names[j]);
  out << '\n';
  for (Eigen::Index t = 0; t < y.rows(); ++t) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) out << (j ? "," : "") << format_double(y.values(t, j));
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const TimeSeriesMatrix& y) {
  std::ofstream out(path);
  if (!out) throw runtime_error("output.path", "cannot write " + path);
  write_csv(out, y);
}

/// Lagged regressors X (row t = y'_{t-1}, ..., y'_{t-P}) and aligned responses.
struct LagDesign {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  int lags = 1;
};

/// The K = P*M lag vector for the period following the last row of `history`.
inline Eigen::VectorXd lag_vector(const Eigen::MatrixXd& history, int lags) {
  const Eigen::Index m = history.cols();
  const Eigen::Index t = history.rows();
  Eigen::VectorXd x(m * lags);
  for (int p = 0; p < lags; ++p) x.segment(p * m, m) = history.row(t - 1 - p).transpose();
  return x;
}

inline LagDesign build_lag_design(const Eigen::MatrixXd& y, int lags) {
  const Eigen::Index t = y.rows();
  const Eigen::Index m = y.cols();
  if (lags < 1) throw config_error("model.lags", "lag order must be at least 1");
  if (lags >= t) throw config_error("model.lags", "lag order must be smaller than the sample length");
  LagDesign d;
  d.lags = lags;
  d.X.resize(t - lags, m * lags);
  d.Y = y.bottomRows(t - lags);
  for (Eigen::Index r = 0; r < t - lags; ++r)
    for (int p = 0; p < lags; ++p) d.X.block(r, p * m, 1, m) = y.row(r + lags - 1 - p);
  return d;
}

inline LagDesign build_lag_design(const TimeSeriesMatrix& y, int lags) {
  return build_lag_design(y.values, lags);
}

// Nelson-Siegel yield-curve factors

struct NsCurveConfig {
  std::vector<double> maturities;  // months
  double gamma = 0.0609;

  void validate() const {
    if (!(gamma > 0.0)) throw config_error("ns.gamma", "decay must be positive");
    for (std::size_t i = 0; i < maturities.size(); ++i) {
      if (!(maturities[i] > 0.0)) throw config_error("ns.maturities", "maturities must be positive");
      if (i && !(maturities[i] > maturities[i - 1]))
        throw config_error("ns.maturities", "maturities must be strictly increasing");
    }
  }
};

/// Level, slope and curvature loadings at maturity `tau` (months).
inline std::array<double, 3> ns_loadings(double tau, double gamma) {
  if (!(tau > 0.0) || !(gamma > 0.0))
    throw config_error("ns", "maturity and decay must be positive");
  const double x = gamma * tau;
  // (1 - e^{-x}) / x without cancellation for small x
  const double slope = x < 1e-8 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
  return {1.0, slope, slope - std::exp(-x)};
}

inline Eigen::MatrixXd ns_loading_matrix(const NsCurveConfig& cfg) {
  Eigen::MatrixXd L(static_cast<Eigen::Index>(cfg.maturities.size()), 3);
  for (std::size_t i = 0; i < cfg.maturities.size(); ++i) {
    auto l = ns_loadings(cfg.maturities[i], cfg.gamma);
    L.row(static_cast<Eigen::Index>(i)) << l[0], l[1], l[2];
  }
  return L;
}

/// Period-by-period least-squares level/slope/curvature factors.
inline TimeSeriesMatrix ns_extract_factors(const TimeSeriesMatrix& yields, const NsCurveConfig& cfg) {
  cfg.validate();
  if (cfg.maturities.size() < 3)
    throw runtime_error("ns.rank", "loading matrix is rank deficient: at least 3 maturities required");
  if (static_cast<Eigen::Index>(cfg.maturities.size()) != yields.cols())
    throw runtime_error("ns.maturities", "maturity count does not match the number of yield columns");
  const Eigen::MatrixXd L = ns_loading_matrix(cfg);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(L);
  if (qr.rank() < 3) throw runtime_error("ns.rank", "loading matrix is rank deficient");
  TimeSeriesMatrix out;
  out.names = {"level", "slope", "curvature"};
  out.frequency = yields.frequency;
  out.values = qr.solve(yields.values.transpose()).transpose();
  return out;
}

/// Fitted yields implied by a T x 3 factor matrix.
inline Eigen::MatrixXd ns_reconstruct(const Eigen::MatrixXd& factors, const NsCurveConfig& cfg) {
  return factors * ns_loading_matrix(cfg).transpose();
}

}  // namespace bavart
