#pragma once

// Posterior-draw directory layout.
//
//   manifest.txt           `key = value` lines, sorted by key
//   forests.txt            one node per line, space separated:
//                            draw equation tree id parent covariate threshold leaf
//                          ids are preorder within the tree (left subtree first);
//                          `-` marks a field that does not apply (threshold and
//                          covariate on leaves, leaf value on internal nodes)
//   covariance.csv         config_hash,draw,equation,regressor,a
//   volatility.csv         config_hash,draw,equation,c,rho,sigma2,h0,h_last
//   log_likelihood.csv     config_hash,sweep,log_likelihood
//   fitted_mean.csv        config_hash,row,<variables...>
//   log_volatility_mean.csv
//
// All reals are written in shortest round-trip form, so a reload reproduces
// every stored value bit for bit.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bavart/data.hpp"
#include "bavart/error.hpp"
#include "bavart/sampler.hpp"
#include "bavart/tree.hpp"

namespace bavart {

using Manifest = std::map<std::string, std::string>;

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

inline std::string manifest_text(const Manifest& m) {
  std::string out;
  for (const auto& [k, v] : m) out += k + " = " + v + '\n';
  return out;
}

inline Manifest parse_manifest(std::istream& in, const std::string& source = "manifest") {
  Manifest m;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw runtime_error("manifest.syntax", source + ": line " + std::to_string(row) + " is not key = value");
    m[std::string(detail::trim(t.substr(0, eq)))] = std::string(detail::trim(t.substr(eq + 1)));
  }
  return m;
}

inline std::string join(const std::vector<std::string>& parts, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? std::string(1, sep) : "") + parts[i];
  return out;
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  s = detail::trim(s);
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(detail::trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Sampler settings as manifest entries. The thread count is left out since
/// it does not affect any result.
inline Manifest model_manifest(const ModelConfig& c) {
  return {
      {"model.lags", std::to_string(c.lags)},
      {"model.trees", std::to_string(c.trees)},
      {"model.sweeps", std::to_string(c.sweeps)},
      {"model.burn_in", std::to_string(c.burn_in)},
      {"model.thin", std::to_string(c.thin)},
      {"model.seed", std::to_string(c.seed)},
      {"model.alpha", format_double(c.alpha)},
      {"model.beta", format_double(c.beta)},
      {"model.prior_sds", format_double(c.prior_sds)},
      {"model.min_leaf_size", std::to_string(c.min_leaf_size)},
      {"model.leaf_scale_is_stddev", c.leaf_scale_is_stddev ? "true" : "false"},
      {"model.stochastic_volatility", c.stochastic_volatility ? "true" : "false"},
      {"model.ordering", join(c.ordering)},
      {"sv.c_mean", format_double(c.sv_prior.c_mean)},
      {"sv.c_var", format_double(c.sv_prior.c_var)},
      {"sv.rho_a", format_double(c.sv_prior.rho_a)},
      {"sv.rho_b", format_double(c.sv_prior.rho_b)},
      {"sv.sigma2_shape", format_double(c.sv_prior.sigma2_shape)},
      {"sv.sigma2_rate", format_double(c.sv_prior.sigma2_rate)},
      {"sv.offset", format_double(c.sv_prior.offset)},
  };
}

namespace detail {

inline const std::string& require(const Manifest& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw runtime_error("draws.manifest", "manifest lacks " + key);
  return it->second;
}

inline double to_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  if (!parse_double(s, v)) throw runtime_error("draws.format", "bad number in " + what + ": " + std::string(s));
  return v;
}

inline long long to_int(std::string_view s, const std::string& what) {
  s = trim(s);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw runtime_error("draws.format", "bad integer in " + what + ": " + std::string(s));
  return v;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw runtime_error("output.path", "cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw runtime_error("draws.missing", "cannot read " + p.string());
  return in;
}

inline void write_matrix(const std::filesystem::path& p, const Eigen::MatrixXd& m, const std::vector<std::string>& names,
                         const std::string& hash) {
  auto out = open_out(p);
  out << "config_hash,row";
  for (const auto& n : names) out << ',' << csv_quote(n);
  out << '\n';
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    out << hash << ',' << t;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(t, j));
    out << '\n';
  }
}

inline Eigen::MatrixXd read_matrix(const std::filesystem::path& p, std::size_t m) {
  auto in = open_in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != m + 2) throw runtime_error("draws.format", p.string() + ": wrong field count");
    std::vector<double> r;
    for (std::size_t j = 2; j < f.size(); ++j) r.push_back(to_double(f[j], p.string()));
    rows.push_back(std::move(r));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < m; ++j) out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
  return out;
}

}  // namespace detail

/// Write a posterior to `dir` (created if needed). `extra` entries (run
/// settings beyond the sampler's) are merged into the manifest.
inline void save_draws(const std::filesystem::path& dir, const PosteriorDraws& post, const Manifest& extra,
                       const std::string& hash) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw runtime_error("output.path", "cannot create " + dir.string());

  Manifest man = extra;
  for (auto& [k, v] : model_manifest(post.config)) man[k] = v;
  for (const auto& [k, v] : post.metadata) man["decision." + k] = v;
  man["config_hash"] = hash;
  man["draws.count"] = std::to_string(post.size());
  man["draws.names"] = join(post.names);
  man["draws.lags"] = std::to_string(post.lags);
  man["draws.covariates"] = std::to_string(post.n_covariates);
  std::vector<std::string> lv;
  for (double v : post.leaf_variance) lv.push_back(format_double(v));
  man["draws.leaf_variance"] = join(lv);
  {
    auto out = detail::open_out(dir / "manifest.txt");
    out << manifest_text(man);
  }

  {
    auto out = detail::open_out(dir / "forests.txt");
    out << "# config_hash " << hash << '\n' << "draw equation tree id parent covariate threshold leaf\n";
    std::vector<int> parent;
    for (std::size_t d = 0; d < post.draws.size(); ++d)
      for (std::size_t j = 0; j < post.draws[d].forests.size(); ++j) {
        const FlatForest& f = post.draws[d].forests[j];
        const auto& nodes = f.nodes();
        for (std::size_t t = 0; t < f.tree_count(); ++t) {
          const auto [first, last] = f.span_of(t);
          parent.assign(static_cast<std::size_t>(last - first), -1);
          for (int i = first; i < last; ++i) {
            const FlatNode& n = nodes[static_cast<std::size_t>(i)];
            const int id = i - first;
            if (!n.is_leaf()) {
              parent[static_cast<std::size_t>(id + 1)] = id;
              parent[static_cast<std::size_t>(n.right - first)] = id;
            }
            out << d << ' ' << j << ' ' << t << ' ' << id << ' ' << parent[static_cast<std::size_t>(id)] << ' ';
            if (n.is_leaf())
              out << "- - " << format_double(n.value) << '\n';
            else
              out << n.covariate << ' ' << format_double(n.value) << " -\n";
          }
        }
      }
  }

  {
    auto out = detail::open_out(dir / "covariance.csv");
    out << "config_hash,draw,equation,regressor,a\n";
    for (std::size_t d = 0; d < post.draws.size(); ++d)
      for (std::size_t j = 0; j < post.draws[d].a.size(); ++j) {
        const auto& a = post.draws[d].a[j];
        for (Eigen::Index l = 0; l < a.size(); ++l)
          out << hash << ',' << d << ',' << j << ',' << l << ',' << format_double(a(l)) << '\n';
      }
  }

  {
    auto out = detail::open_out(dir / "volatility.csv");
    out << "config_hash,draw,equation,c,rho,sigma2,h0,h_last\n";
    for (std::size_t d = 0; d < post.draws.size(); ++d)
      for (std::size_t j = 0; j < post.draws[d].sv.size(); ++j) {
        const SvState& s = post.draws[d].sv[j];
        out << hash << ',' << d << ',' << j << ',' << format_double(s.c) << ',' << format_double(s.rho) << ','
            << format_double(s.sigma2) << ',' << format_double(s.h0) << ',' << format_double(s.last()) << '\n';
      }
  }

  {
    auto out = detail::open_out(dir / "log_likelihood.csv");
    out << "config_hash,sweep,log_likelihood\n";
    for (std::size_t i = 0; i < post.log_likelihood.size(); ++i)
      out << hash << ',' << i << ',' << format_double(post.log_likelihood[i]) << '\n';
  }

  detail::write_matrix(dir / "fitted_mean.csv", post.fitted_mean, post.names, hash);
  detail::write_matrix(dir / "log_volatility_mean.csv", post.log_volatility_mean, post.names, hash);
}

/// Read a directory written by save_draws. Volatility paths come back as
/// their final value only, which is all prediction needs.
inline PosteriorDraws load_draws(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw runtime_error("draws.missing", "no draws directory at " + dir.string());
  Manifest man;
  {
    auto in = detail::open_in(dir / "manifest.txt");
    man = parse_manifest(in, (dir / "manifest.txt").string());
  }
  using detail::require;
  using detail::to_double;
  using detail::to_int;

  PosteriorDraws post;
  ModelConfig& c = post.config;
  c.lags = static_cast<int>(to_int(require(man, "model.lags"), "model.lags"));
  c.trees = static_cast<int>(to_int(require(man, "model.trees"), "model.trees"));
  c.sweeps = static_cast<int>(to_int(require(man, "model.sweeps"), "model.sweeps"));
  c.burn_in = static_cast<int>(to_int(require(man, "model.burn_in"), "model.burn_in"));
  c.thin = static_cast<int>(to_int(require(man, "model.thin"), "model.thin"));
  c.seed = static_cast<std::uint64_t>(to_int(require(man, "model.seed"), "model.seed"));
  c.alpha = to_double(require(man, "model.alpha"), "model.alpha");
  c.beta = to_double(require(man, "model.beta"), "model.beta");
  c.prior_sds = to_double(require(man, "model.prior_sds"), "model.prior_sds");
  c.min_leaf_size = static_cast<int>(to_int(require(man, "model.min_leaf_size"), "model.min_leaf_size"));
  c.leaf_scale_is_stddev = require(man, "model.leaf_scale_is_stddev") == "true";
  c.stochastic_volatility = require(man, "model.stochastic_volatility") == "true";
  c.ordering = split_list(require(man, "model.ordering"));
  c.sv_prior.c_mean = to_double(require(man, "sv.c_mean"), "sv.c_mean");
  c.sv_prior.c_var = to_double(require(man, "sv.c_var"), "sv.c_var");
  c.sv_prior.rho_a = to_double(require(man, "sv.rho_a"), "sv.rho_a");
  c.sv_prior.rho_b = to_double(require(man, "sv.rho_b"), "sv.rho_b");
  c.sv_prior.sigma2_shape = to_double(require(man, "sv.sigma2_shape"), "sv.sigma2_shape");
  c.sv_prior.sigma2_rate = to_double(require(man, "sv.sigma2_rate"), "sv.sigma2_rate");
  c.sv_prior.offset = to_double(require(man, "sv.offset"), "sv.offset");

  post.names = split_list(require(man, "draws.names"));
  post.lags = static_cast<int>(to_int(require(man, "draws.lags"), "draws.lags"));
  post.n_covariates = static_cast<int>(to_int(require(man, "draws.covariates"), "draws.covariates"));
  for (const auto& v : split_list(require(man, "draws.leaf_variance")))
    post.leaf_variance.push_back(to_double(v, "draws.leaf_variance"));
  for (const auto& [k, v] : man)
    if (k.rfind("decision.", 0) == 0) post.metadata[k.substr(9)] = v;
  post.metadata["config_hash"] = require(man, "config_hash");

  const auto n_draws = static_cast<std::size_t>(to_int(require(man, "draws.count"), "draws.count"));
  const std::size_t m = post.names.size();
  post.draws.resize(n_draws);
  for (auto& d : post.draws) {
    d.a.resize(m);
    d.sv.resize(m);
    for (std::size_t j = 0; j < m; ++j) d.a[j] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(j));
  }

  auto check_index = [&](long long d, long long j, const std::string& file) {
    if (d < 0 || static_cast<std::size_t>(d) >= n_draws || j < 0 || static_cast<std::size_t>(j) >= m)
      throw runtime_error("draws.format", file + ": draw or equation index out of range");
  };

  {
    const std::string file = (dir / "forests.txt").string();
    auto in = detail::open_in(dir / "forests.txt");
    std::vector<std::vector<std::vector<FlatNode>>> nodes(n_draws, std::vector<std::vector<FlatNode>>(m));
    std::vector<std::vector<std::vector<int>>> roots(n_draws, std::vector<std::vector<int>>(m));
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
      const std::string_view t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      if (!header) {
        header = true;
        continue;
      }
      std::istringstream ss{std::string(t)};
      std::string f[8];
      for (auto& s : f)
        if (!(ss >> s)) throw runtime_error("draws.format", file + ": node line needs 8 fields");
      const long long d = to_int(f[0], file), j = to_int(f[1], file), tree = to_int(f[2], file);
      const long long id = to_int(f[3], file), parent = to_int(f[4], file);
      check_index(d, j, file);
      auto& ns = nodes[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)];
      auto& rs = roots[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)];
      if (id == 0) {
        if (tree != static_cast<long long>(rs.size()) || parent != -1)
          throw runtime_error("draws.format", file + ": trees must be listed in order, root first");
        rs.push_back(static_cast<int>(ns.size()));
      } else if (rs.empty() || parent < 0 || parent >= id) {
        throw runtime_error("draws.format", file + ": node listed before its parent");
      }
      const int base = rs.back();
      if (static_cast<long long>(ns.size()) - base != id) throw runtime_error("draws.format", file + ": ids must be preorder");
      if (id > 0) {
        FlatNode& p = ns[static_cast<std::size_t>(base + parent)];
        if (p.is_leaf()) throw runtime_error("draws.format", file + ": parent is a leaf");
        if (parent + 1 != id) p.right = static_cast<int>(base + id);
      }
      FlatNode n;
      if (f[5] == "-") {
        n.value = to_double(f[7], file);
      } else {
        n.covariate = static_cast<int>(to_int(f[5], file));
        if (n.covariate < 0 || n.covariate >= post.n_covariates)
          throw runtime_error("draws.format", file + ": covariate out of range");
        n.value = to_double(f[6], file);
      }
      ns.push_back(n);
    }
    for (std::size_t d = 0; d < n_draws; ++d)
      for (std::size_t j = 0; j < m; ++j) {
        auto& ns = nodes[d][j];
        for (const FlatNode& n : ns)
          if (!n.is_leaf() && n.right < 0) throw runtime_error("draws.format", file + ": internal node lacks a right child");
        post.draws[d].forests.emplace_back(std::move(ns), std::move(roots[d][j]));
      }
  }

  {
    const std::string file = (dir / "covariance.csv").string();
    auto in = detail::open_in(dir / "covariance.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() != 5) throw runtime_error("draws.format", file + ": wrong field count");
      const long long d = to_int(f[1], file), j = to_int(f[2], file), l = to_int(f[3], file);
      check_index(d, j, file);
      if (l < 0 || l >= j) throw runtime_error("draws.format", file + ": regressor index out of range");
      post.draws[static_cast<std::size_t>(d)].a[static_cast<std::size_t>(j)](l) = to_double(f[4], file);
    }
  }

  {
    const std::string file = (dir / "volatility.csv").string();
    auto in = detail::open_in(dir / "volatility.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() != 8) throw runtime_error("draws.format", file + ": wrong field count");
      const long long d = to_int(f[1], file), j = to_int(f[2], file);
      check_index(d, j, file);
      SvState& s = post.draws[static_cast<std::size_t>(d)].sv[static_cast<std::size_t>(j)];
      s.c = to_double(f[3], file);
      s.rho = to_double(f[4], file);
      s.sigma2 = to_double(f[5], file);
      s.h0 = to_double(f[6], file);
      s.h = Eigen::VectorXd::Constant(1, to_double(f[7], file));
    }
  }

  {
    const std::string file = (dir / "log_likelihood.csv").string();
    auto in = detail::open_in(dir / "log_likelihood.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() != 3) throw runtime_error("draws.format", file + ": wrong field count");
      post.log_likelihood.push_back(to_double(f[2], file));
    }
  }

  post.fitted_mean = detail::read_matrix(dir / "fitted_mean.csv", m);
  post.log_volatility_mean = detail::read_matrix(dir / "log_volatility_mean.csv", m);
  return post;
}

}  // namespace bavart
