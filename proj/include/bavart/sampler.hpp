#pragma once

// Equation-by-equation Gibbs sampler for the sum-of-trees VAR in structural
// form: y_j = f_j(X) + sum_{l<j} a_jl eps_l + e_j, e_jt ~ N(0, exp(h_jt)).

#include <Eigen/Dense>

#include <algorithm>
#include <set>
#include <cstdint>
#include <map>
#include <span>
#include <numbers>
#include <string>
#include <vector>

#include "bavart/data.hpp"
#include "bavart/error.hpp"
#include "bavart/rng.hpp"
#include "bavart/shrinkage.hpp"
#include "bavart/sv.hpp"
#include "bavart/tree.hpp"

namespace bavart {

struct ModelConfig {
  int lags = 1;
  int trees = 250;
  int sweeps = 5000;
  int burn_in = 2500;
  int thin = 1;
  std::uint64_t seed = 1;
  double alpha = 0.95;
  double beta = 2.0;
  double prior_sds = 2.0;  // s-tilde in the leaf scale
  int min_leaf_size = 5;
  bool leaf_scale_is_stddev = true;
  bool stochastic_volatility = true;
  std::vector<std::string> ordering;  // empty: data column order
  unsigned threads = 1;
  SvPrior sv_prior{};

  int retained() const { return (sweeps - burn_in) / thin; }

  void validate() const {
    if (trees < 1) throw config_error("config.trees", "number of trees must be at least 1");
    if (lags < 1) throw config_error("config.lags", "lag order must be at least 1");
    if (burn_in < 0) throw config_error("config.burn_in", "burn-in must be non-negative");
    if (sweeps <= burn_in) throw config_error("config.sweeps", "sweeps must exceed burn-in");
    if (thin < 1) throw config_error("config.thin", "thinning must be at least 1");
    if (retained() < 1) throw config_error("config.thin", "no draws would be retained");
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("config.alpha", "alpha must lie in (0,1)");
    if (!(beta >= 0.0)) throw config_error("config.beta", "beta must be non-negative");
    if (!(prior_sds > 0.0)) throw config_error("config.prior_sds", "prior standard deviations must be positive");
    if (min_leaf_size < 1) throw config_error("config.min_leaf_size", "minimum leaf size must be positive");
  }

  TreePriorConfig tree_prior(double leaf_var) const {
    return TreePriorConfig{alpha, beta, leaf_var, min_leaf_size};
  }
};

struct EquationState {
  std::vector<DecisionTree> forest;
  Eigen::MatrixXd tree_fit;  // T x N, column k = g_jk(X)
  Eigen::VectorXd a;         // coefficients on eps_0..eps_{j-1}
  SvState sv;
  TreePriorConfig prior;  // carries this equation's leaf variance
};

struct ModelState {
  TreeData design;
  Eigen::MatrixXd Y;  // responses, T x M
  std::vector<EquationState> eq;
  Eigen::MatrixXd F;    // fitted conditional means
  Eigen::MatrixXd eps;  // reduced-form residuals Y - F
  HorseshoeState shrink;
  long sweep = 0;

  int m() const { return static_cast<int>(Y.cols()); }
  Eigen::Index t() const { return Y.rows(); }

  std::vector<Eigen::VectorXd> covariance_rows() const {
    std::vector<Eigen::VectorXd> a;
    for (const auto& e : eq) a.push_back(e.a);
    return a;
  }
};

/// Unit lower-triangular impact matrix A0 = (I - A)^{-1}, where row j of A
/// holds a_j: eps_t = A0 e_t.
inline Eigen::MatrixXd impact_matrix(const std::vector<Eigen::VectorXd>& a) {
  const auto m = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd ia = Eigen::MatrixXd::Identity(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index l = 0; l < j; ++l) ia(j, l) = -a[static_cast<std::size_t>(j)](l);
  return ia.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(m, m));
}

/// Sum of a forest's trees at one covariate vector.
template <class Row>
double forest_predict(const std::vector<DecisionTree>& forest, const Row& x) {
  double s = 0.0;
  for (const auto& tree : forest) s += tree.evaluate(x);
  return s;
}

/// Residual variance of a least-squares fit of y on [1, X]; falls back to the
/// sample variance when the regression is not identified.
inline double ols_residual_variance(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / std::max<Eigen::Index>(n - 1, 1);
  if (n <= X.cols() + 2) return std::max(var, 1e-8);
  Eigen::MatrixXd D(n, X.cols() + 1);
  D.col(0).setOnes();
  D.rightCols(X.cols()) = X;
  const Eigen::VectorXd beta = D.colPivHouseholderQr().solve(y);
  const double ssr = (y - D * beta).squaredNorm();
  const double s2 = ssr / static_cast<double>(n - D.cols());
  return s2 > 1e-12 ? s2 : std::max(var, 1e-8);
}

/// Stumps at zero, a_j = 0, log-volatility at the log OLS residual variance.
inline ModelState initialize_state(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const ModelConfig& cfg) {
  if (X.rows() != Y.rows()) throw runtime_error("sampler.dimensions", "design and response lengths differ");
  ModelState s;
  s.design = TreeData(X);
  s.Y = Y;
  const Eigen::Index t = Y.rows();
  const int m = static_cast<int>(Y.cols());
  for (int j = 0; j < m; ++j) {
    EquationState e;
    e.forest.assign(static_cast<std::size_t>(cfg.trees), DecisionTree{});
    e.tree_fit = Eigen::MatrixXd::Zero(t, cfg.trees);
    e.a = Eigen::VectorXd::Zero(j);
    const Eigen::VectorXd y = Y.col(j);
    const double range = y.maxCoeff() - y.minCoeff();
    e.prior = cfg.tree_prior(leaf_variance(range, cfg.prior_sds, cfg.trees, cfg.leaf_scale_is_stddev));
    const double c = std::log(ols_residual_variance(X, y));
    e.sv = SvState::constant(t, c, cfg.stochastic_volatility ? 0.9 : 0.0, cfg.stochastic_volatility ? 0.1 : 0.0);
    s.eq.push_back(std::move(e));
  }
  s.F = Eigen::MatrixXd::Zero(t, m);
  s.eps = Y;
  s.shrink = HorseshoeState::initial(m);
  return s;
}

/// R_jk = y_j - sum_{l<j} a_jl eps_l - sum_{s != k} g_js(X).
inline Eigen::VectorXd partial_residuals(int j, int k, const ModelState& s) {
  const auto& e = s.eq[static_cast<std::size_t>(j)];
  Eigen::VectorXd r = s.Y.col(j) - s.F.col(j) + e.tree_fit.col(k);
  for (Eigen::Index l = 0; l < e.a.size(); ++l) r -= e.a(l) * s.eps.col(l);
  return r;
}

/// Structural residuals e_j = eps_j - sum_{l<j} a_jl eps_l.
inline Eigen::VectorXd structural_residuals(int j, const ModelState& s) {
  const auto& e = s.eq[static_cast<std::size_t>(j)];
  Eigen::VectorXd r = s.eps.col(j);
  for (Eigen::Index l = 0; l < e.a.size(); ++l) r -= e.a(l) * s.eps.col(l);
  return r;
}

inline double gaussian_log_likelihood(const ModelState& s) {
  double ll = 0.0;
  for (int j = 0; j < s.m(); ++j) {
    const Eigen::VectorXd e = structural_residuals(j, s);
    const Eigen::VectorXd& h = s.eq[static_cast<std::size_t>(j)].sv.h;
    for (Eigen::Index t = 0; t < e.size(); ++t)
      ll += -0.5 * (std::log(2.0 * std::numbers::pi) + h(t) + e(t) * e(t) * std::exp(-h(t)));
  }
  return ll;
}

namespace detail {

// Backfit every tree of equation j against the eps snapshot held in `s`.
inline void update_forest(ModelState& s, int j, Rng& rng) {
  auto& e = s.eq[static_cast<std::size_t>(j)];
  const Eigen::Index t = s.t();
  std::vector<double> w(static_cast<std::size_t>(t));
  for (Eigen::Index i = 0; i < t; ++i) w[static_cast<std::size_t>(i)] = std::exp(e.sv.h(i));
  Eigen::VectorXd base = s.Y.col(j);
  for (Eigen::Index l = 0; l < e.a.size(); ++l) base -= e.a(l) * s.eps.col(l);
  Eigen::VectorXd fj = s.F.col(j);
  std::vector<double> r(static_cast<std::size_t>(t));
  for (std::size_t k = 0; k < e.forest.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    for (Eigen::Index i = 0; i < t; ++i) r[static_cast<std::size_t>(i)] = base(i) - fj(i) + e.tree_fit(i, kk);
    DecisionTree& tree = e.forest[k];
    TreeMoveSummary summary = summarize(tree, s.design);
    Proposal p = propose_move(tree, summary, s.design, rng);
    if (mh_accept(tree, std::move(p), s.design, r, w, e.prior, rng)) summary.members = leaf_members(tree, s.design);
    sample_leaf_params(tree, summary.members, r, w, e.prior.leaf_variance, rng);
    for (int id : tree.leaves()) {
      const double mu = tree.node(id).mu;
      for (int i : summary.members[static_cast<std::size_t>(id)]) {
        fj(i) += mu - e.tree_fit(i, kk);
        e.tree_fit(i, kk) = mu;
      }
    }
  }
  s.F.col(j) = e.tree_fit.rowwise().sum();
}

// Draw a_j and the volatility state given the refreshed residuals.
inline double update_covariance_and_volatility(ModelState& s, int j, const ModelConfig& cfg, Rng& rng) {
  auto& e = s.eq[static_cast<std::size_t>(j)];
  const Eigen::VectorXd w = e.sv.h.array().exp();
  if (j > 0)
    e.a = sample_covariance_row(s.eps.col(j), s.eps.leftCols(j), w, s.shrink.prior_variances(j), rng);
  const Eigen::VectorXd resid = structural_residuals(j, s);
  std::span<const double> view(resid.data(), static_cast<std::size_t>(resid.size()));
  e.sv = cfg.stochastic_volatility ? sample_sv(view, e.sv, cfg.sv_prior, rng)
                                   : sample_constant_volatility(view, e.sv, cfg.sv_prior, rng);
  double ll = 0.0;
  for (Eigen::Index t = 0; t < resid.size(); ++t)
    ll += -0.5 * (std::log(2.0 * std::numbers::pi) + e.sv.h(t) + resid(t) * resid(t) * std::exp(-e.sv.h(t)));
  return ll;
}

}  // namespace detail

/// One Gibbs sweep. Forests of all equations are backfitted against the
/// residuals cached at the start of the sweep (so equations are independent
/// and may run concurrently), the cache is refreshed, then each a_j and
/// volatility state is drawn from the current residuals, and finally the
/// shared shrinkage scales. Every equation and step owns a named RNG stream
/// derived from (seed, sweep, equation), so the result does not depend on the
/// thread count. Returns the log-likelihood at the new state.
inline double gibbs_sweep(ModelState& s, const ModelConfig& cfg) {
  const auto sweep = static_cast<std::uint64_t>(s.sweep);
  const int m = s.m();
  parallel_for(static_cast<std::size_t>(m), cfg.threads, [&](std::size_t j) {
    Rng rng = Rng::stream(cfg.seed, sweep, j, 0);
    detail::update_forest(s, static_cast<int>(j), rng);
  });
  s.eps = s.Y - s.F;
  std::vector<double> ll(static_cast<std::size_t>(m));
  parallel_for(static_cast<std::size_t>(m), cfg.threads, [&](std::size_t j) {
    Rng rng = Rng::stream(cfg.seed, sweep, j, 1);
    ll[j] = detail::update_covariance_and_volatility(s, static_cast<int>(j), cfg, rng);
  });
  Rng rng = Rng::stream(cfg.seed, sweep, static_cast<std::uint64_t>(m), 2);
  sample_horseshoe(s.shrink, s.covariance_rows(), rng);
  ++s.sweep;
  double total = 0.0;
  for (double v : ll) total += v;
  return total;
}

/// Parameters of one retained sweep.
struct PosteriorDraw {
  std::vector<FlatForest> forests;  // per equation
  std::vector<Eigen::VectorXd> a;
  std::vector<SvState> sv;
};

struct PosteriorDraws {
  ModelConfig config;
  std::vector<std::string> names;  // equation order (after any reordering)
  int lags = 1;
  int n_covariates = 0;
  std::vector<PosteriorDraw> draws;
  std::vector<double> log_likelihood;  // every sweep, burn-in included
  Eigen::MatrixXd fitted_mean;         // posterior mean of F(X)
  Eigen::MatrixXd log_volatility_mean;
  std::vector<double> leaf_variance;
  std::map<std::string, std::string> metadata;

  int m() const { return static_cast<int>(names.size()); }
  std::size_t size() const { return draws.size(); }
};

inline std::map<std::string, std::string> decision_metadata(const ModelConfig& cfg) {
  return {
      {"leaf_scale_is_stddev", cfg.leaf_scale_is_stddev ? "true" : "false"},
      {"split_rule", "covariate uniform among those varying in the node; threshold uniform among node values except the largest"},
      {"swap_move", "parent/child internal-node rule swap"},
      {"move_probabilities", "grow=0.25,prune=0.25,swap=0.4,change=0.1 renormalised over available moves"},
      {"sv_mixture", "omori-10"},
      {"sv_offset", format_double(cfg.sv_prior.offset)},
      {"sv_interweaving", "every sweep"},
      {"horseshoe_global", "shared across equations"},
      {"horseshoe_order", "a_j then scales"},
      {"residual_snapshot", "tree updates use residuals cached at sweep start"},
      {"impact_matrix", "A0 = (I - A)^-1 with a_jl on reduced-form residuals"},
  };
}

/// Run the chain on a generic design. Columns of Y are equations, in order.
inline PosteriorDraws fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const ModelConfig& cfg,
                          std::vector<std::string> names = {}) {
  cfg.validate();
  if (!X.allFinite() || !Y.allFinite()) throw runtime_error("data.values", "design or responses not finite");
  if (names.empty())
    for (Eigen::Index j = 0; j < Y.cols(); ++j) names.push_back("y" + std::to_string(j + 1));
  ModelState s = initialize_state(X, Y, cfg);

  PosteriorDraws out;
  out.config = cfg;
  out.names = std::move(names);
  out.lags = cfg.lags;
  out.n_covariates = static_cast<int>(X.cols());
  out.fitted_mean = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
  out.log_volatility_mean = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
  for (const auto& e : s.eq) out.leaf_variance.push_back(e.prior.leaf_variance);
  out.metadata = decision_metadata(cfg);
  out.draws.reserve(static_cast<std::size_t>(cfg.retained()));

  for (int it = 0; it < cfg.sweeps; ++it) {
    out.log_likelihood.push_back(gibbs_sweep(s, cfg));
    if (it < cfg.burn_in || (it - cfg.burn_in + 1) % cfg.thin != 0) continue;
    if (static_cast<int>(out.draws.size()) >= cfg.retained()) continue;
    PosteriorDraw d;
    for (int j = 0; j < s.m(); ++j) {
      const auto& e = s.eq[static_cast<std::size_t>(j)];
      d.forests.emplace_back(e.forest);
      d.a.push_back(e.a);
      d.sv.push_back(e.sv);
      out.log_volatility_mean.col(j) += e.sv.h;
    }
    out.fitted_mean += s.F;
    out.draws.push_back(std::move(d));
  }
  const double n = static_cast<double>(out.draws.size());
  out.fitted_mean /= n;
  out.log_volatility_mean /= n;
  return out;
}

/// Posterior median (over retained draws) of the per-draw splitting counts.
inline Eigen::MatrixXd splitting_count_median(const PosteriorDraws& post) {
  if (post.draws.empty()) throw runtime_error("importance.draws", "no posterior draws");
  const int k = post.n_covariates, m = post.m();
  std::vector<Eigen::MatrixXi> per;
  per.reserve(post.size());
  for (const auto& d : post.draws) per.push_back(splitting_rule_counts(d.forests, k));
  Eigen::MatrixXd out(k, m);
  std::vector<double> cell(per.size());
  for (int r = 0; r < k; ++r)
    for (int j = 0; j < m; ++j) {
      for (std::size_t d = 0; d < per.size(); ++d) cell[d] = per[d](r, j);
      std::sort(cell.begin(), cell.end());
      const std::size_t n = cell.size();
      out(r, j) = n % 2 ? cell[n / 2] : 0.5 * (cell[n / 2 - 1] + cell[n / 2]);
    }
  return out;
}

/// Estimate the tree VAR on a time-series panel.
inline PosteriorDraws estimate(const TimeSeriesMatrix& data, const ModelConfig& cfg) {
  cfg.validate();
  data.validate();
  const TimeSeriesMatrix y = cfg.ordering.empty() ? data : data.select(cfg.ordering);
  if (!cfg.ordering.empty() && (cfg.ordering.size() != data.names.size() ||
                                std::set<std::string>(cfg.ordering.begin(), cfg.ordering.end()).size() != data.names.size()))
    throw config_error("model.ordering", "ordering must be a permutation of the variable names");
  if (y.rows() <= cfg.lags + 20)
    throw config_error("config.lags", "sample too short: need more than lags + 20 observations");
  const LagDesign design = build_lag_design(y, cfg.lags);
  return fit(design.X, design.Y, cfg, y.names);
}

}  // namespace bavart
