#pragma once

// Stochastic volatility for one equation: log-variance h_t follows a
// stationary AR(1) around c. Sampling uses the 10-component Gaussian mixture
// approximation to log chi^2_1, a joint tridiagonal draw of h_0..h_T, an MH
// step for (c, rho, sigma^2) in the centred parameterisation and an
// ancillarity-sufficiency interweaving step for (c, sigma) in the
// non-centred one.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "bavart/error.hpp"
#include "bavart/rng.hpp"

namespace bavart {

struct SvState {
  Eigen::VectorXd h;  // h_1..h_T
  double h0 = 0.0;
  double c = 0.0;
  double rho = 0.9;
  double sigma2 = 0.1;  // 0 when volatility is held constant

  double sigma() const { return std::sqrt(sigma2); }
  double last() const { return h.size() ? h(h.size() - 1) : h0; }

  void validate() const {
    if (!(std::abs(rho) < 1.0)) throw runtime_error("sv.rho", "persistence must lie in (-1,1)");
    if (!(sigma2 >= 0.0)) throw runtime_error("sv.sigma2", "volatility innovation variance must be non-negative");
    if (!h.allFinite() || !std::isfinite(h0) || !std::isfinite(c))
      throw runtime_error("sv.h", "log-volatility must be finite");
  }

  /// Constant-variance state at log-variance c for T periods.
  static SvState constant(Eigen::Index t, double c, double rho = 0.9, double sigma2 = 0.1) {
    return SvState{Eigen::VectorXd::Constant(t, c), c, c, rho, sigma2};
  }
};

struct SvPrior {
  double c_mean = 0.0;
  double c_var = 100.0;
  double rho_a = 25.0;  // (rho+1)/2 ~ Beta(a, b)
  double rho_b = 5.0;
  double sigma2_shape = 0.5;  // sigma^2 ~ Gamma(shape, rate)
  double sigma2_rate = 0.5;
  double offset = 1e-10;  // added to squared residuals before the log
};

/// Gaussian mixture approximating the log chi^2_1 density (Omori et al. 2007).
struct LogChi2Mixture {
  static constexpr std::array<double, 10> prob{0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                                               0.18842, 0.12047, 0.05591, 0.01575, 0.00115};
  static constexpr std::array<double, 10> mean{1.92677,  1.34744,  0.73504,  0.02266,  -0.85173,
                                               -1.97278, -3.46788, -5.55246, -8.68384, -14.65000};
  static constexpr std::array<double, 10> var{0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                                              0.98583, 1.57469, 2.54498, 4.16591, 7.33342};
};

namespace detail {

inline Eigen::VectorXd log_squares(std::span<const double> e, double offset) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(e.size()));
  for (std::size_t t = 0; t < e.size(); ++t) y(static_cast<Eigen::Index>(t)) = std::log(e[t] * e[t] + offset);
  return y;
}

inline std::vector<int> sample_indicators(const Eigen::VectorXd& ystar, const Eigen::VectorXd& h, Rng& rng) {
  using M = LogChi2Mixture;
  std::vector<int> r(static_cast<std::size_t>(ystar.size()));
  std::array<double, 10> w;
  for (Eigen::Index t = 0; t < ystar.size(); ++t) {
    const double d = ystar(t) - h(t);
    double max_lw = -1e300;
    std::array<double, 10> lw;
    for (std::size_t k = 0; k < 10; ++k) {
      const double z = d - M::mean[k];
      lw[k] = std::log(M::prob[k]) - 0.5 * std::log(M::var[k]) - 0.5 * z * z / M::var[k];
      max_lw = std::max(max_lw, lw[k]);
    }
    for (std::size_t k = 0; k < 10; ++k) w[k] = std::exp(lw[k] - max_lw);
    r[static_cast<std::size_t>(t)] = static_cast<int>(rng.categorical(w.data(), w.size()));
  }
  return r;
}

// Joint draw of x_0..x_T from N(Q^{-1} b, Q^{-1}) for symmetric tridiagonal Q
// (diagonal d, sub-diagonal s) via its bidiagonal Cholesky factor.
inline Eigen::VectorXd sample_tridiagonal(const Eigen::VectorXd& d, const Eigen::VectorXd& s,
                                          const Eigen::VectorXd& b, Rng& rng) {
  const Eigen::Index n = d.size();
  Eigen::VectorXd ld(n), ls(n > 0 ? n - 1 : 0);
  ld(0) = std::sqrt(d(0));
  for (Eigen::Index i = 1; i < n; ++i) {
    ls(i - 1) = s(i - 1) / ld(i - 1);
    ld(i) = std::sqrt(d(i) - ls(i - 1) * ls(i - 1));
  }
  Eigen::VectorXd a(n);  // L a = b
  a(0) = b(0) / ld(0);
  for (Eigen::Index i = 1; i < n; ++i) a(i) = (b(i) - ls(i - 1) * a(i - 1)) / ld(i);
  for (Eigen::Index i = 0; i < n; ++i) a(i) += rng.normal();
  Eigen::VectorXd x(n);  // L' x = a
  x(n - 1) = a(n - 1) / ld(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) x(i) = (a(i) - ls(i) * x(i + 1)) / ld(i);
  return x;
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * z * z / var;
}

// Log of the parts of the centred full conditional of (c, rho, sigma^2) that
// the auxiliary-regression proposal does not cover, in (gamma, rho, sigma^2)
// coordinates with gamma = c (1 - rho).
inline double sv_param_log_weight(double c, double rho, double sigma2, double h0, const SvPrior& prior) {
  if (!(std::abs(rho) < 1.0) || !(sigma2 > 0.0)) return -std::numeric_limits<double>::infinity();
  const double u = 0.5 * (rho + 1.0);
  return log_normal_pdf(h0, c, sigma2 / (1.0 - rho * rho)) + log_normal_pdf(c, prior.c_mean, prior.c_var) +
         (prior.rho_a - 1.0) * std::log(u) + (prior.rho_b - 1.0) * std::log1p(-u) +
         (prior.sigma2_shape - 1.0) * std::log(sigma2) - prior.sigma2_rate * sigma2 - std::log(1.0 - rho) +
         std::log(sigma2);
}

}  // namespace detail

/// One full update of the volatility state given this equation's structural
/// residuals.
inline SvState sample_sv(std::span<const double> residuals, const SvState& state, const SvPrior& prior, Rng& rng) {
  using M = LogChi2Mixture;
  const Eigen::Index n = static_cast<Eigen::Index>(residuals.size());
  if (n < 3) throw runtime_error("sv.length", "stochastic volatility needs at least 3 observations");
  if (state.h.size() != n) throw runtime_error("sv.length", "state length does not match residuals");
  for (double e : residuals)
    if (!std::isfinite(e)) throw runtime_error("sv.residuals", "residuals must be finite");

  SvState out = state;
  const Eigen::VectorXd ystar = detail::log_squares(residuals, prior.offset);
  const auto r = detail::sample_indicators(ystar, out.h, rng);

  // h_0..h_T | indicators, parameters
  {
    const double c = out.c, rho = out.rho, s2 = out.sigma2;
    Eigen::VectorXd d(n + 1), s(n), b(n + 1);
    d(0) = 1.0 / s2;
    b(0) = c * (1.0 - rho) / s2;
    for (Eigen::Index t = 1; t <= n; ++t) {
      const auto k = static_cast<std::size_t>(r[static_cast<std::size_t>(t - 1)]);
      const bool last = t == n;
      d(t) = (last ? 1.0 : 1.0 + rho * rho) / s2 + 1.0 / M::var[k];
      b(t) = c * (last ? 1.0 - rho : (1.0 - rho) * (1.0 - rho)) / s2 + (ystar(t - 1) - M::mean[k]) / M::var[k];
      s(t - 1) = -rho / s2;
    }
    const Eigen::VectorXd x = detail::sample_tridiagonal(d, s, b, rng);
    out.h0 = x(0);
    out.h = x.tail(n);
  }

  // Centred step: independence MH with the auxiliary AR(1) regression
  // posterior (flat prior on intercept/slope, 1/sigma^2 on the variance).
  {
    Eigen::Matrix2d xtx = Eigen::Matrix2d::Zero();
    Eigen::Vector2d xty = Eigen::Vector2d::Zero();
    double prev = out.h0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Vector2d x(1.0, prev);
      xtx += x * x.transpose();
      xty += x * out.h(t);
      prev = out.h(t);
    }
    const Eigen::Vector2d coef = xtx.ldlt().solve(xty);
    double ssr = 0.0;
    prev = out.h0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double e = out.h(t) - coef(0) - coef(1) * prev;
      ssr += e * e;
      prev = out.h(t);
    }
    const double s2_prop = rng.inv_gamma(0.5 * static_cast<double>(n - 2), 0.5 * ssr);
    const Eigen::Matrix2d chol = (s2_prop * xtx.inverse()).llt().matrixL();
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    const Eigen::Vector2d prop = coef + chol * z;
    const double rho_prop = prop(1);
    if (std::abs(rho_prop) < 1.0) {
      const double c_prop = prop(0) / (1.0 - rho_prop);
      const double lw_new = detail::sv_param_log_weight(c_prop, rho_prop, s2_prop, out.h0, prior);
      const double lw_old = detail::sv_param_log_weight(out.c, out.rho, out.sigma2, out.h0, prior);
      if (std::log(rng.uniform()) < lw_new - lw_old) {
        out.c = c_prop;
        out.rho = rho_prop;
        out.sigma2 = s2_prop;
      }
    }
  }

  // Interweaving: redraw (c, sigma) given the standardised path. With
  // sigma ~ N(0, 1) (equivalent to sigma^2 ~ Gamma(1/2, 1/2)) and a Gaussian
  // prior on c this block is conjugate.
  {
    const double sd = out.sigma();
    const double h0_tilde = (out.h0 - out.c) / sd;
    Eigen::VectorXd h_tilde = (out.h.array() - out.c) / sd;
    const double sigma_prior_var = 1.0 / (2.0 * prior.sigma2_rate);
    Eigen::Matrix2d prec = Eigen::Matrix2d::Zero();
    prec(0, 0) = 1.0 / prior.c_var;
    prec(1, 1) = 1.0 / sigma_prior_var;
    Eigen::Vector2d lin(prior.c_mean / prior.c_var, 0.0);
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto k = static_cast<std::size_t>(r[static_cast<std::size_t>(t)]);
      const Eigen::Vector2d x(1.0, h_tilde(t));
      prec += x * x.transpose() / M::var[k];
      lin += x * (ystar(t) - M::mean[k]) / M::var[k];
    }
    Eigen::LLT<Eigen::Matrix2d> llt(prec);
    const Eigen::Vector2d mean = llt.solve(lin);
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    const Eigen::Vector2d draw = mean + llt.matrixU().solve(z);
    const double c_new = draw(0);
    const double sigma_signed = draw(1);
    if (sigma_signed != 0.0) {
      out.c = c_new;
      out.sigma2 = sigma_signed * sigma_signed;
      out.h = c_new + sigma_signed * h_tilde.array();
      out.h0 = c_new + sigma_signed * h0_tilde;
    }
  }
  return out;
}

/// Constant-variance update: h_t = c for all t, c drawn given mixture
/// indicators. Used when stochastic volatility is switched off.
inline SvState sample_constant_volatility(std::span<const double> residuals, const SvState& state,
                                          const SvPrior& prior, Rng& rng) {
  using M = LogChi2Mixture;
  const Eigen::Index n = static_cast<Eigen::Index>(residuals.size());
  const Eigen::VectorXd ystar = detail::log_squares(residuals, prior.offset);
  const auto r = detail::sample_indicators(ystar, Eigen::VectorXd::Constant(n, state.c), rng);
  double prec = 1.0 / prior.c_var;
  double lin = prior.c_mean / prior.c_var;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto k = static_cast<std::size_t>(r[static_cast<std::size_t>(t)]);
    prec += 1.0 / M::var[k];
    lin += (ystar(t) - M::mean[k]) / M::var[k];
  }
  const double c = lin / prec + rng.normal() / std::sqrt(prec);
  SvState out = state;
  out.c = c;
  out.h0 = c;
  out.h = Eigen::VectorXd::Constant(n, c);
  out.rho = 0.0;
  out.sigma2 = 0.0;
  return out;
}

/// Simulate h_{T+1..T+horizon} forward from the last in-sample value.
inline std::vector<double> forecast_volatility(const SvState& state, int horizon, Rng& rng) {
  if (horizon < 1) throw config_error("forecast.horizon", "horizon must be at least 1");
  std::vector<double> path(static_cast<std::size_t>(horizon));
  double h = state.last();
  const double sd = state.sigma();
  for (auto& v : path) {
    h = state.c + state.rho * (h - state.c) + sd * rng.normal();
    v = h;
  }
  return path;
}

}  // namespace bavart
