#pragma once

// Synthetic data generators with known ground truth.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bavart/data.hpp"
#include "bavart/error.hpp"
#include "bavart/rng.hpp"

namespace bavart {

/// y_t = intercept + Phi_1 y_{t-1} + ... + A0 e_t, e_t ~ N(0, diag(variances)).
struct LinearVarSpec {
  Eigen::MatrixXd coefficients;  // M x (P*M), lag-1 block first
  Eigen::VectorXd intercept;
  Eigen::MatrixXd impact;        // unit lower triangular A0
  Eigen::VectorXd variances;     // structural variances
  int length = 400;
  int burn_in = 200;
  std::uint64_t seed = 1;

  int m() const { return static_cast<int>(coefficients.rows()); }
  int lags() const { return static_cast<int>(coefficients.cols() / coefficients.rows()); }

  void validate() const {
    const auto m = coefficients.rows();
    if (m < 1 || coefficients.cols() % m != 0) throw config_error("dgp.coefficients", "coefficient matrix must be M x (P*M)");
    if (intercept.size() != m) throw config_error("dgp.intercept", "intercept length must equal M");
    if (impact.rows() != m || impact.cols() != m) throw config_error("dgp.impact", "impact matrix must be M x M");
    if (variances.size() != m || (variances.array() <= 0.0).any())
      throw config_error("dgp.variances", "structural variances must be positive, one per variable");
    if (length < lags() + 2) throw config_error("dgp.length", "series too short");
  }
};

struct SimulatedSeries {
  TimeSeriesMatrix data;
  Eigen::MatrixXd conditional_mean;  // E[y_t | past]; first `lags` rows undefined (zero)
  Eigen::MatrixXd log_volatility;    // when simulated
};

inline std::vector<std::string> default_names(int m) {
  std::vector<std::string> n;
  for (int j = 0; j < m; ++j) n.push_back("y" + std::to_string(j + 1));
  return n;
}

inline SimulatedSeries simulate_linear_var(const LinearVarSpec& spec) {
  spec.validate();
  const int m = spec.m(), p = spec.lags();
  const int total = spec.length + spec.burn_in;
  Rng rng(stream_seed(spec.seed, 0x766172ULL));
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(total, m);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(total, m);
  for (int t = p; t < total; ++t) {
    const Eigen::VectorXd x = lag_vector(y.topRows(t), p);
    Eigen::VectorXd e(m);
    for (int j = 0; j < m; ++j) e(j) = std::sqrt(spec.variances(j)) * rng.normal();
    mean.row(t) = (spec.intercept + spec.coefficients * x).transpose();
    y.row(t) = mean.row(t) + (spec.impact * e).transpose();
  }
  SimulatedSeries out;
  out.data.values = y.bottomRows(spec.length);
  out.data.names = default_names(m);
  out.conditional_mean = mean.bottomRows(spec.length);
  return out;
}

/// Analytic impulse response Phi^h A0 s_j delta for a VAR(1).
inline Eigen::MatrixXd linear_irf(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& impact, int shock, double delta,
                                  int horizons) {
  Eigen::MatrixXd out(horizons, phi.rows());
  Eigen::VectorXd r = impact.col(shock) * delta;
  for (int h = 0; h < horizons; ++h) {
    out.row(h) = r.transpose();
    r = phi * r;
  }
  return out;
}

/// Two-regime VAR(1): the regime is set by whether variable `switch_var` at
/// lag 1 is at most `threshold`.
struct ThresholdVarSpec {
  Eigen::MatrixXd low;   // M x M, used when y_{switch,t-1} <= threshold
  Eigen::MatrixXd high;  // M x M
  int switch_var = 0;
  double threshold = 0.0;
  Eigen::MatrixXd impact;
  Eigen::VectorXd variances;
  int length = 500;
  int burn_in = 200;
  std::uint64_t seed = 1;
};

inline SimulatedSeries simulate_threshold_var(const ThresholdVarSpec& spec) {
  const auto m = spec.low.rows();
  if (spec.low.cols() != m || spec.high.rows() != m || spec.high.cols() != m)
    throw config_error("dgp.coefficients", "regime matrices must be M x M");
  const int total = spec.length + spec.burn_in;
  Rng rng(stream_seed(spec.seed, 0x74766172ULL));
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(total, m);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(total, m);
  for (int t = 1; t < total; ++t) {
    const Eigen::VectorXd prev = y.row(t - 1).transpose();
    const Eigen::MatrixXd& phi = prev(spec.switch_var) <= spec.threshold ? spec.low : spec.high;
    Eigen::VectorXd e(m);
    for (Eigen::Index j = 0; j < m; ++j) e(j) = std::sqrt(spec.variances(j)) * rng.normal();
    mean.row(t) = (phi * prev).transpose();
    y.row(t) = mean.row(t) + (spec.impact * e).transpose();
  }
  SimulatedSeries out;
  out.data.values = y.bottomRows(spec.length);
  out.data.names = default_names(static_cast<int>(m));
  out.conditional_mean = mean.bottomRows(spec.length);
  return out;
}

/// e_t = exp(h_t / 2) z_t with h_t = c + rho (h_{t-1} - c) + sigma nu_t,
/// h_0 drawn from the stationary distribution.
struct SvSpec {
  double c = -1.0;
  double rho = 0.95;
  double sigma = 0.2;
  int length = 1000;
  std::uint64_t seed = 1;
};

struct SimulatedSv {
  Eigen::VectorXd residuals;
  Eigen::VectorXd h;
};

inline SimulatedSv simulate_sv(const SvSpec& spec) {
  if (!(std::abs(spec.rho) < 1.0) || !(spec.sigma > 0.0) || spec.length < 3)
    throw config_error("dgp.sv", "invalid stochastic volatility specification");
  Rng rng(stream_seed(spec.seed, 0x7376ULL));
  SimulatedSv out{Eigen::VectorXd(spec.length), Eigen::VectorXd(spec.length)};
  double h = spec.c + spec.sigma / std::sqrt(1.0 - spec.rho * spec.rho) * rng.normal();
  for (int t = 0; t < spec.length; ++t) {
    h = spec.c + spec.rho * (h - spec.c) + spec.sigma * rng.normal();
    out.h(t) = h;
    out.residuals(t) = std::exp(0.5 * h) * rng.normal();
  }
  return out;
}

/// Yields from level/slope/curvature factors following a VAR(1), plus
/// optional iid measurement noise.
struct NsYieldSpec {
  NsCurveConfig curve;
  Eigen::Matrix3d factor_dynamics = Eigen::Vector3d(0.9, 0.8, 0.7).asDiagonal();
  Eigen::Vector3d factor_mean = Eigen::Vector3d(5.0, -1.0, 0.5);
  Eigen::Vector3d factor_sd = Eigen::Vector3d(0.3, 0.3, 0.4);
  double noise_sd = 0.0;
  int length = 200;
  int burn_in = 100;
  std::uint64_t seed = 1;
};

struct SimulatedYields {
  TimeSeriesMatrix yields;
  TimeSeriesMatrix factors;
};

inline SimulatedYields simulate_ns_yields(const NsYieldSpec& spec) {
  spec.curve.validate();
  Rng rng(stream_seed(spec.seed, 0x6e73ULL));
  const int total = spec.length + spec.burn_in;
  Eigen::MatrixXd f(total, 3);
  Eigen::Vector3d cur = spec.factor_mean;
  for (int t = 0; t < total; ++t) {
    Eigen::Vector3d e(rng.normal(), rng.normal(), rng.normal());
    cur = spec.factor_mean + spec.factor_dynamics * (cur - spec.factor_mean) + spec.factor_sd.cwiseProduct(e);
    f.row(t) = cur.transpose();
  }
  SimulatedYields out;
  out.factors.values = f.bottomRows(spec.length);
  out.factors.names = {"level", "slope", "curvature"};
  out.yields.values = ns_reconstruct(out.factors.values, spec.curve);
  if (spec.noise_sd > 0.0)
    for (Eigen::Index t = 0; t < out.yields.values.rows(); ++t)
      for (Eigen::Index j = 0; j < out.yields.values.cols(); ++j) out.yields.values(t, j) += spec.noise_sd * rng.normal();
  for (double tau : spec.curve.maturities) out.yields.names.push_back("m" + format_double(tau));
  return out;
}

}  // namespace bavart
