#pragma once

// Batch commands behind the command-line front end. Each reads a config file,
// writes CSV tables with a leading config_hash column, and throws bavart::Error
// on failure.

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bavart/backtest.hpp"
#include "bavart/config.hpp"
#include "bavart/data.hpp"
#include "bavart/error.hpp"
#include "bavart/forecast.hpp"
#include "bavart/girf.hpp"
#include "bavart/io.hpp"
#include "bavart/sampler.hpp"
#include "bavart/simulate.hpp"

namespace bavart {

namespace fs = std::filesystem;

/// Loaded input: the raw file, the modeled panel (after differencing and, in
/// ns mode, factor extraction) and the hash of the file contents.
struct PreparedData {
  TimeSeriesMatrix raw;      // the file as read, before differencing
  TimeSeriesMatrix series;   // what the scoring sees: yields or plain variables, possibly differenced
  TimeSeriesMatrix modeled;  // what the sampler sees
  std::string file_hash;
};

inline PreparedData prepare_data(const RunConfig& c) {
  if (c.data_path.empty()) throw config_error("data.path", "no data file configured");
  std::ifstream in(c.data_path, std::ios::binary);
  if (!in) throw runtime_error("data.path", "cannot read " + c.data_path);
  std::stringstream buf;
  buf << in.rdbuf();
  PreparedData p;
  p.file_hash = hash_hex(fnv1a(buf.str()));
  buf.seekg(0);
  p.raw = parse_csv(buf, c.data_path);
  if (!c.frequency.empty()) p.raw.frequency = c.frequency;
  p.series = c.difference ? p.raw.diff() : p.raw;
  p.series.validate();
  if (c.mode == ModelMode::Ns) {
    if (c.ns.maturities.size() != static_cast<std::size_t>(p.series.cols()))
      throw config_error("ns.maturities", "one maturity per yield column is required");
    p.modeled = ns_extract_factors(p.series, c.ns);
  } else {
    p.modeled = p.series;
  }
  return p;
}

inline fs::path draws_dir(const RunConfig& c) { return fs::path(c.output_dir) / "draws"; }

inline std::vector<std::string> covariate_names(const std::vector<std::string>& names, int lags) {
  std::vector<std::string> out;
  for (int p = 1; p <= lags; ++p)
    for (const auto& n : names) out.push_back(n + "_lag" + std::to_string(p));
  return out;
}

namespace detail {

inline void write_run_manifest(const fs::path& path, const RunConfig& c, const PreparedData& d, const std::string& command) {
  Manifest m = run_manifest(c);
  m["config_hash"] = config_hash(c);
  m["data.fnv1a"] = d.file_hash;
  m["command"] = command;
  auto out = open_out(path);
  out << manifest_text(m);
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw runtime_error("output.path", "cannot create " + dir.string());
}

}  // namespace detail

inline void cmd_estimate(const RunConfig& c) {
  const PreparedData d = prepare_data(c);
  const PosteriorDraws post = estimate(d.modeled, c.model);
  Manifest extra = run_manifest(c);
  extra["data.fnv1a"] = d.file_hash;
  save_draws(draws_dir(c), post, extra, config_hash(c));
}

inline void cmd_backtest(const RunConfig& c) {
  const PreparedData d = prepare_data(c);
  if (c.backtest.holdout >= d.series.rows())
    throw config_error("backtest.holdout", "hold-out is longer than the sample");
  BacktestSettings bt{c.backtest.holdout, c.backtest.horizons, c.backtest.reestimate_every, c.backtest.draws_seed};
  std::optional<NsCurveConfig> ns;
  if (c.mode == ModelMode::Ns) ns = c.ns;
  const BacktestResult res = run_backtest(d.series, c.model, bt, ns);

  const fs::path dir(c.output_dir);
  detail::ensure_dir(dir);
  const std::string hash = config_hash(c);
  detail::write_run_manifest(dir / "backtest_manifest.txt", c, d, "backtest");
  {
    auto out = detail::open_out(dir / "backtest_msfe.csv");
    out << "config_hash,model,series,horizon,count,msfe\n";
    for (const auto& s : res.scores)
      out << hash << ',' << s.model << ',' << csv_quote(s.series) << ',' << s.horizon << ',' << s.count << ','
          << format_double(s.msfe) << '\n';
  }
  {
    auto out = detail::open_out(dir / "backtest_crps.csv");
    out << "config_hash,model,series,horizon,count,crps\n";
    for (const auto& s : res.scores)
      out << hash << ',' << s.model << ',' << csv_quote(s.series) << ',' << s.horizon << ',' << s.count << ','
          << format_double(s.crps) << '\n';
  }
  {
    auto out = detail::open_out(dir / "backtest_forecasts.csv");
    out << "config_hash,origin,horizon,series,median,outcome,crps\n";
    for (const auto& f : res.forecasts)
      out << hash << ',' << f.origin << ',' << f.horizon << ',' << csv_quote(f.series) << ',' << format_double(f.point)
          << ',' << format_double(f.outcome) << ',' << format_double(f.crps) << '\n';
  }
}

/// Resolve the GIRF block against a fitted posterior.
inline GirfSpec girf_spec(const RunConfig& c, const PosteriorDraws& post, const PreparedData& d) {
  auto index_of = [&](const std::string& name, const std::string& key) {
    for (std::size_t j = 0; j < post.names.size(); ++j)
      if (post.names[j] == name) return static_cast<int>(j);
    throw config_error(key, "unknown variable " + name);
  };
  if (c.girf.shock.empty()) throw config_error("girf.shock", "no shocked variable configured");
  GirfSpec spec;
  spec.shock = index_of(c.girf.shock, "girf.shock");
  spec.size = c.girf.size == "unit" ? ShockSize::Unit : ShockSize::OneStdDev;
  spec.horizons = c.girf.horizons;
  spec.origin = c.girf.origin;
  for (const auto& r : c.girf.restricted) spec.restricted.push_back(index_of(r, "girf.restricted"));
  if (!spec.restricted.empty() && c.difference) {
    if (c.girf.zlb_space.empty())
      throw config_error("girf.zlb_space", "restrictions on differenced data need zlb_space = modeled or level");
    if (c.girf.zlb_space == "level") {
      if (c.mode == ModelMode::Ns) throw config_error("girf.zlb_space", "level pinning is not available for factor models");
      const long origin = spec.origin < 0 ? static_cast<long>(d.modeled.rows()) - 1 : spec.origin;
      // Differenced row t is level row t + 1.
      const TimeSeriesMatrix lv = d.raw.select(post.names);
      if (origin + 1 >= lv.rows()) throw config_error("girf.origin", "conditioning date outside the sample");
      spec.origin_levels = lv.values.row(origin + 1).transpose();
    }
  }
  return spec;
}

inline void cmd_girf(const RunConfig& c) {
  const PreparedData d = prepare_data(c);
  const PosteriorDraws post = load_draws(draws_dir(c));
  const GirfSpec spec = girf_spec(c, post, d);
  const TimeSeriesMatrix hist = d.modeled.select(post.names);
  const PredictiveDraws resp = girf(post, hist.values, spec, c.model.threads);

  const fs::path dir(c.output_dir);
  detail::ensure_dir(dir);
  const std::string hash = config_hash(c);
  detail::write_run_manifest(dir / "girf_manifest.txt", c, d, "girf");
  auto out = detail::open_out(dir / "girf.csv");
  out << "config_hash,draws_hash,shock,horizon,variable,quantile,response\n";
  const std::string draws_hash = post.metadata.at("config_hash");
  for (int h = 0; h < resp.horizons; ++h)
    for (int j = 0; j < resp.m; ++j) {
      const auto cell = resp.cell(h, j);
      for (double q : girf_quantiles())
        out << hash << ',' << draws_hash << ',' << csv_quote(post.names[static_cast<std::size_t>(spec.shock)]) << ',' << h
            << ',' << csv_quote(post.names[static_cast<std::size_t>(j)]) << ',' << format_double(q) << ','
            << format_double(quantile(cell, q)) << '\n';
    }
}

inline void cmd_importance(const RunConfig& c) {
  const PosteriorDraws post = load_draws(draws_dir(c));
  const Eigen::MatrixXd counts = splitting_count_median(post);
  const auto cov = covariate_names(post.names, post.lags);
  const fs::path dir(c.output_dir);
  detail::ensure_dir(dir);
  auto out = detail::open_out(dir / "importance.csv");
  out << "config_hash,covariate";
  for (const auto& n : post.names) out << ',' << csv_quote(n);
  out << '\n';
  const std::string hash = post.metadata.at("config_hash");
  for (Eigen::Index k = 0; k < counts.rows(); ++k) {
    out << hash << ',' << csv_quote(cov[static_cast<std::size_t>(k)]);
    for (Eigen::Index j = 0; j < counts.cols(); ++j) out << ',' << format_double(counts(k, j));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic data generation.
//
//   [dgp]     kind (linear_var|threshold_var|sv|ns), seed, length, burn_in
//   linear_var:    coefficients, intercept, impact, variances
//   threshold_var: low, high, switch_var, threshold, impact, variances
//   sv:            c, rho, sigma
//   ns:            maturities, gamma, noise_sd, factor_dynamics, factor_mean, factor_sd
//   [output]  dir
//
// Matrices are written row by row, rows separated by ';' and entries by ','.

inline Eigen::MatrixXd parse_matrix(const std::string& s, const std::string& key) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : split_list(s, ';')) rows.push_back(detail::parse_real_list(r, key));
  if (rows.empty() || rows.front().empty()) throw config_error(key, "empty matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw config_error(key, "ragged matrix");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

inline Eigen::VectorXd parse_vector(const std::string& s, const std::string& key) {
  const auto v = detail::parse_real_list(s, key);
  if (v.empty()) throw config_error(key, "empty vector");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline void cmd_simulate(std::istream& spec_in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(spec_in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw config_error("config.syntax", e.message() + " at line " + std::to_string(e.line()));
  }
  detail::IniView ini(tree);
  Manifest truth;
  auto req = [&](const std::string& key) {
    auto v = ini.get(key);
    if (!v) throw config_error(key, "missing setting " + key);
    truth[key] = *v;
    return *v;
  };
  auto opt = [&](const std::string& key, const std::string& fallback) {
    auto v = ini.get(key);
    truth[key] = v ? *v : fallback;
    return truth[key];
  };
  const std::string kind = req("dgp.kind");
  const long long seed = detail::parse_integer(opt("dgp.seed", "1"), "dgp.seed");
  if (seed < 0) throw config_error("dgp.seed", "seed must be non-negative");
  const auto length = static_cast<int>(detail::parse_integer(opt("dgp.length", "400"), "dgp.length"));
  const auto burn = static_cast<int>(detail::parse_integer(opt("dgp.burn_in", "200"), "dgp.burn_in"));
  if (length < 3) throw config_error("dgp.length", "length must be at least 3");
  if (burn < 0) throw config_error("dgp.burn_in", "burn-in must be non-negative");
  const fs::path dir(opt("output.dir", "sim"));
  truth.erase("output.dir");

  TimeSeriesMatrix data;
  std::vector<std::pair<std::string, TimeSeriesMatrix>> extras;
  if (kind == "linear_var") {
    LinearVarSpec s;
    s.coefficients = parse_matrix(req("dgp.coefficients"), "dgp.coefficients");
    const auto m = s.coefficients.rows();
    if (auto v = ini.get("dgp.intercept")) {
      truth["dgp.intercept"] = *v;
      s.intercept = parse_vector(*v, "dgp.intercept");
    } else {
      s.intercept = Eigen::VectorXd::Zero(m);
    }
    s.impact = parse_matrix(req("dgp.impact"), "dgp.impact");
    s.variances = parse_vector(req("dgp.variances"), "dgp.variances");
    s.length = length;
    s.burn_in = burn;
    s.seed = static_cast<std::uint64_t>(seed);
    const auto sim = simulate_linear_var(s);
    data = sim.data;
    extras.emplace_back("truth_mean.csv", TimeSeriesMatrix{sim.conditional_mean, data.names, ""});
  } else if (kind == "threshold_var") {
    ThresholdVarSpec s;
    s.low = parse_matrix(req("dgp.low"), "dgp.low");
    s.high = parse_matrix(req("dgp.high"), "dgp.high");
    s.switch_var = static_cast<int>(detail::parse_integer(opt("dgp.switch_var", "0"), "dgp.switch_var"));
    s.threshold = detail::parse_real(opt("dgp.threshold", "0"), "dgp.threshold");
    s.impact = parse_matrix(req("dgp.impact"), "dgp.impact");
    s.variances = parse_vector(req("dgp.variances"), "dgp.variances");
    const auto m = s.low.rows();
    if (s.impact.rows() != m || s.impact.cols() != m || s.variances.size() != m)
      throw config_error("dgp.impact", "impact and variances must match the regime matrices");
    if (s.switch_var < 0 || s.switch_var >= m) throw config_error("dgp.switch_var", "switch variable out of range");
    s.length = length;
    s.burn_in = burn;
    s.seed = static_cast<std::uint64_t>(seed);
    const auto sim = simulate_threshold_var(s);
    data = sim.data;
    extras.emplace_back("truth_mean.csv", TimeSeriesMatrix{sim.conditional_mean, data.names, ""});
  } else if (kind == "sv") {
    SvSpec s;
    s.c = detail::parse_real(req("dgp.c"), "dgp.c");
    s.rho = detail::parse_real(req("dgp.rho"), "dgp.rho");
    s.sigma = detail::parse_real(req("dgp.sigma"), "dgp.sigma");
    s.length = length;
    s.seed = static_cast<std::uint64_t>(seed);
    const auto sim = simulate_sv(s);
    data = TimeSeriesMatrix{sim.residuals, {"e"}, ""};
    extras.emplace_back("truth_h.csv", TimeSeriesMatrix{sim.h, {"h"}, ""});
  } else if (kind == "ns") {
    NsYieldSpec s;
    s.curve.maturities = detail::parse_real_list(req("dgp.maturities"), "dgp.maturities");
    s.curve.gamma = detail::parse_real(opt("dgp.gamma", "0.0609"), "dgp.gamma");
    s.noise_sd = detail::parse_real(opt("dgp.noise_sd", "0"), "dgp.noise_sd");
    if (auto v = ini.get("dgp.factor_dynamics")) {
      truth["dgp.factor_dynamics"] = *v;
      const Eigen::MatrixXd phi = parse_matrix(*v, "dgp.factor_dynamics");
      if (phi.rows() != 3 || phi.cols() != 3) throw config_error("dgp.factor_dynamics", "factor dynamics must be 3 x 3");
      s.factor_dynamics = phi;
    }
    if (auto v = ini.get("dgp.factor_mean")) {
      truth["dgp.factor_mean"] = *v;
      const Eigen::VectorXd mu = parse_vector(*v, "dgp.factor_mean");
      if (mu.size() != 3) throw config_error("dgp.factor_mean", "three factor means required");
      s.factor_mean = mu;
    }
    if (auto v = ini.get("dgp.factor_sd")) {
      truth["dgp.factor_sd"] = *v;
      const Eigen::VectorXd sd = parse_vector(*v, "dgp.factor_sd");
      if (sd.size() != 3 || (sd.array() <= 0.0).any()) throw config_error("dgp.factor_sd", "three positive factor sds required");
      s.factor_sd = sd;
    }
    s.length = length;
    s.burn_in = burn;
    s.seed = static_cast<std::uint64_t>(seed);
    try {
      s.curve.validate();
    } catch (const Error& e) {
      throw config_error("dgp.maturities", e.what());
    }
    const auto sim = simulate_ns_yields(s);
    data = sim.yields;
    extras.emplace_back("truth_factors.csv", sim.factors);
  } else {
    throw config_error("dgp.kind", "kind must be linear_var, threshold_var, sv or ns");
  }
  ini.reject_unknown();

  detail::ensure_dir(dir);
  const std::string hash = hash_hex(fnv1a(manifest_text(truth)));
  truth["config_hash"] = hash;
  write_csv((dir / "data.csv").string(), data);
  for (const auto& [name, m] : extras) write_csv((dir / name).string(), m);
  auto out = detail::open_out(dir / "truth.txt");
  out << manifest_text(truth);
}

inline void cmd_simulate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config.path", "cannot read spec file " + path);
  cmd_simulate(in);
}

}  // namespace bavart
