#pragma once

// Run configuration read from an INI-style file.
//
//   [data]      path, difference (true|false), frequency
//   [model]     mode (plain|ns), lags, trees, sweeps, burn_in, thin, seed,
//               alpha, beta, prior_sds, min_leaf_size, leaf_scale_is_stddev,
//               stochastic_volatility, ordering (comma list), threads
//   [ns]        maturities (months, comma list), gamma
//   [backtest]  holdout, horizons (comma list), reestimate_every, draws_seed
//   [girf]      shock (variable name), size (one_sd|unit), horizons,
//               restricted (comma list of names), origin (row index, -1 = last),
//               zlb_space (modeled|level)
//   [output]    dir
//
// A missing lag order defaults to 2 in ns mode and 1 in plain mode.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <Eigen/Dense>

#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bavart/data.hpp"
#include "bavart/error.hpp"
#include "bavart/io.hpp"
#include "bavart/sampler.hpp"

namespace bavart {

enum class ModelMode { Plain, Ns };

struct BacktestConfig {
  int holdout = 24;
  std::vector<int> horizons{1, 3};
  int reestimate_every = 1;
  std::uint64_t draws_seed = 7;

  int max_horizon() const {
    int h = 0;
    for (int v : horizons) h = std::max(h, v);
    return h;
  }
};

struct GirfConfig {
  std::string shock;
  std::string size = "one_sd";
  int horizons = 24;
  std::vector<std::string> restricted;
  long origin = -1;
  std::string zlb_space;  // required when restrictions meet differenced data
};

struct RunConfig {
  std::string data_path;
  bool difference = false;
  std::string frequency;
  ModelMode mode = ModelMode::Plain;
  ModelConfig model;
  NsCurveConfig ns;
  BacktestConfig backtest;
  GirfConfig girf;
  std::string output_dir = "out";

  void validate() const {
    model.validate();
    if (mode == ModelMode::Ns) ns.validate();
    if (backtest.holdout < 1) throw config_error("backtest.holdout", "hold-out length must be positive");
    if (backtest.horizons.empty()) throw config_error("backtest.horizons", "at least one horizon is required");
    for (int h : backtest.horizons)
      if (h < 1) throw config_error("backtest.horizons", "horizons must be positive");
    if (backtest.reestimate_every < 1)
      throw config_error("backtest.reestimate_every", "re-estimation interval must be positive");
    if (girf.horizons < 1) throw config_error("girf.horizons", "horizon must be at least 1");
    if (girf.size != "one_sd" && girf.size != "unit") throw config_error("girf.size", "size must be one_sd or unit");
    if (!girf.zlb_space.empty() && girf.zlb_space != "modeled" && girf.zlb_space != "level")
      throw config_error("girf.zlb_space", "zlb_space must be modeled or level");
  }
};

namespace detail {

inline std::vector<double> parse_real_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& part : split_list(s)) {
    double v = 0.0;
    if (!parse_double(part, v)) throw config_error(key, "not a list of numbers: " + s);
    out.push_back(v);
  }
  return out;
}

inline long long parse_integer(const std::string& s, const std::string& key) {
  const std::string_view t = trim(s);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) throw config_error(key, "not an integer: " + s);
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw config_error(key, "not a boolean: " + s);
}

inline double parse_real(const std::string& s, const std::string& key) {
  double v = 0.0;
  if (!parse_double(s, v)) throw config_error(key, "not a number: " + s);
  return v;
}

// Flattened `section.key` view of an INI file that remembers which keys were
// consumed so that misspelled settings can be rejected.
class IniView {
 public:
  explicit IniView(const boost::property_tree::ptree& tree) {
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty())
        throw config_error(section, "setting outside of any section");
      for (const auto& [key, value] : body) values_[section + "." + key] = value.data();
    }
  }

  std::optional<std::string> get(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return std::string(trim(it->second));
  }

  void reject_unknown() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) throw config_error(k, "unknown setting " + k);
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw config_error("config.syntax", e.message() + " at line " + std::to_string(e.line()));
  }
  detail::IniView ini(tree);
  RunConfig c;
  using namespace detail;
  auto str = [&](const std::string& k, std::string& out) {
    if (auto v = ini.get(k)) out = *v;
  };
  auto integer = [&](const std::string& k, auto& out) {
    if (auto v = ini.get(k)) out = static_cast<std::decay_t<decltype(out)>>(parse_integer(*v, k));
  };
  auto real = [&](const std::string& k, double& out) {
    if (auto v = ini.get(k)) out = parse_real(*v, k);
  };
  auto boolean = [&](const std::string& k, bool& out) {
    if (auto v = ini.get(k)) out = parse_bool(*v, k);
  };

  str("data.path", c.data_path);
  boolean("data.difference", c.difference);
  str("data.frequency", c.frequency);

  std::string mode = "plain";
  str("model.mode", mode);
  if (mode == "plain")
    c.mode = ModelMode::Plain;
  else if (mode == "ns")
    c.mode = ModelMode::Ns;
  else
    throw config_error("model.mode", "mode must be plain or ns");
  c.model.lags = c.mode == ModelMode::Ns ? 2 : 1;
  integer("model.lags", c.model.lags);
  integer("model.trees", c.model.trees);
  integer("model.sweeps", c.model.sweeps);
  integer("model.burn_in", c.model.burn_in);
  integer("model.thin", c.model.thin);
  if (auto v = ini.get("model.seed")) {
    const long long s = parse_integer(*v, "model.seed");
    if (s < 0) throw config_error("model.seed", "seed must be non-negative");
    c.model.seed = static_cast<std::uint64_t>(s);
  }
  real("model.alpha", c.model.alpha);
  real("model.beta", c.model.beta);
  real("model.prior_sds", c.model.prior_sds);
  integer("model.min_leaf_size", c.model.min_leaf_size);
  boolean("model.leaf_scale_is_stddev", c.model.leaf_scale_is_stddev);
  boolean("model.stochastic_volatility", c.model.stochastic_volatility);
  if (auto v = ini.get("model.ordering")) c.model.ordering = split_list(*v);
  if (auto v = ini.get("model.threads")) {
    const long long t = parse_integer(*v, "model.threads");
    if (t < 1) throw config_error("model.threads", "threads must be at least 1");
    c.model.threads = static_cast<unsigned>(t);
  }

  const bool has_ns = ini.get("ns.maturities").has_value() || ini.get("ns.gamma").has_value();
  if (has_ns && c.mode != ModelMode::Ns) throw config_error("model.mode", "[ns] settings given but mode is plain");
  if (auto v = ini.get("ns.maturities")) c.ns.maturities = parse_real_list(*v, "ns.maturities");
  real("ns.gamma", c.ns.gamma);

  integer("backtest.holdout", c.backtest.holdout);
  if (auto v = ini.get("backtest.horizons")) {
    c.backtest.horizons.clear();
    for (const auto& h : split_list(*v)) c.backtest.horizons.push_back(static_cast<int>(parse_integer(h, "backtest.horizons")));
  }
  integer("backtest.reestimate_every", c.backtest.reestimate_every);
  integer("backtest.draws_seed", c.backtest.draws_seed);

  str("girf.shock", c.girf.shock);
  str("girf.size", c.girf.size);
  integer("girf.horizons", c.girf.horizons);
  if (auto v = ini.get("girf.restricted")) c.girf.restricted = split_list(*v);
  integer("girf.origin", c.girf.origin);
  str("girf.zlb_space", c.girf.zlb_space);

  str("output.dir", c.output_dir);
  ini.reject_unknown();
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config.path", "cannot read config file " + path);
  return parse_run_config(in);
}

/// Every setting that can influence a result, in canonical text form. The
/// output directory and thread count are excluded.
inline Manifest run_manifest(const RunConfig& c) {
  Manifest m = model_manifest(c.model);
  m["data.path"] = c.data_path;
  m["data.difference"] = c.difference ? "true" : "false";
  m["data.frequency"] = c.frequency;
  m["model.mode"] = c.mode == ModelMode::Ns ? "ns" : "plain";
  if (c.mode == ModelMode::Ns) {
    std::vector<std::string> mats;
    for (double v : c.ns.maturities) mats.push_back(format_double(v));
    m["ns.maturities"] = join(mats);
    m["ns.gamma"] = format_double(c.ns.gamma);
    m["ns.maturity_unit"] = "months";
  }
  m["backtest.holdout"] = std::to_string(c.backtest.holdout);
  std::vector<std::string> hs;
  for (int h : c.backtest.horizons) hs.push_back(std::to_string(h));
  m["backtest.horizons"] = join(hs);
  m["backtest.reestimate_every"] = std::to_string(c.backtest.reestimate_every);
  m["backtest.draws_seed"] = std::to_string(c.backtest.draws_seed);
  m["girf.shock"] = c.girf.shock;
  m["girf.size"] = c.girf.size;
  m["girf.horizons"] = std::to_string(c.girf.horizons);
  m["girf.restricted"] = join(c.girf.restricted);
  m["girf.origin"] = std::to_string(c.girf.origin);
  m["girf.zlb_space"] = c.girf.zlb_space;
  return m;
}

inline std::string config_hash(const RunConfig& c) { return hash_hex(fnv1a(manifest_text(run_manifest(c)))); }

}  // namespace bavart
