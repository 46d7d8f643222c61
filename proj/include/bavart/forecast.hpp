#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bavart/data.hpp"
#include "bavart/error.hpp"
#include "bavart/rng.hpp"
#include "bavart/sampler.hpp"

namespace bavart {

/// Simulated future paths: draws x horizons x variables.
struct PredictiveDraws {
  int n_draws = 0;
  int horizons = 0;
  int m = 0;
  std::vector<double> values;
  std::vector<std::string> names;
  long origin = -1;  // index of the last observation used

  PredictiveDraws() = default;
  PredictiveDraws(int draws, int horizon, int vars)
      : n_draws(draws), horizons(horizon), m(vars),
        values(static_cast<std::size_t>(draws) * static_cast<std::size_t>(horizon) * static_cast<std::size_t>(vars)) {}

  double& at(int d, int h, int j) { return values[index(d, h, j)]; }
  double at(int d, int h, int j) const { return values[index(d, h, j)]; }

  /// All draws for one (horizon, variable) cell.
  std::vector<double> cell(int h, int j) const {
    std::vector<double> out(static_cast<std::size_t>(n_draws));
    for (int d = 0; d < n_draws; ++d) out[static_cast<std::size_t>(d)] = at(d, h, j);
    return out;
  }

 private:
  std::size_t index(int d, int h, int j) const {
    return (static_cast<std::size_t>(d) * static_cast<std::size_t>(horizons) + static_cast<std::size_t>(h)) *
               static_cast<std::size_t>(m) +
           static_cast<std::size_t>(j);
  }
};

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw runtime_error("forecast.empty", "quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

/// Per-(horizon, variable) medians of a predictive sample.
inline Eigen::MatrixXd point_forecasts(const PredictiveDraws& p) {
  Eigen::MatrixXd out(p.horizons, p.m);
  for (int h = 0; h < p.horizons; ++h)
    for (int j = 0; j < p.m; ++j) out(h, j) = median(p.cell(h, j));
  return out;
}

/// Multi-step predictive simulation. For each retained draw the volatilities
/// are propagated through their AR(1), a Gaussian draw with covariance
/// A0 H A0' is added to the forest mean, and the simulated value is fed back
/// into the lag vector. `history` must be in the model's variable order.
inline PredictiveDraws predict(const PosteriorDraws& post, const Eigen::MatrixXd& history, int horizon,
                               std::uint64_t seed, unsigned threads = 1) {
  if (horizon < 1) throw config_error("forecast.horizon", "horizon must be at least 1");
  if (post.draws.empty()) throw runtime_error("forecast.draws", "no posterior draws");
  const int m = post.m();
  const int lags = post.lags;
  if (history.cols() != m || history.rows() < lags)
    throw runtime_error("forecast.history", "history does not match the model dimensions");
  PredictiveDraws out(static_cast<int>(post.draws.size()), horizon, m);
  out.names = post.names;
  out.origin = static_cast<long>(history.rows()) - 1;
  const Eigen::VectorXd x0 = lag_vector(history, lags);

  parallel_for(post.draws.size(), threads, [&](std::size_t d) {
    const PosteriorDraw& draw = post.draws[d];
    Rng rng = Rng::stream(seed, d, 0x7072656469ULL);
    const Eigen::MatrixXd a0 = impact_matrix(draw.a);
    std::vector<std::vector<double>> h(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) h[static_cast<std::size_t>(j)] = forecast_volatility(draw.sv[static_cast<std::size_t>(j)], horizon, rng);
    Eigen::VectorXd x = x0;
    Eigen::VectorXd shock(m), y(m);
    for (int s = 0; s < horizon; ++s) {
      for (int j = 0; j < m; ++j)
        shock(j) = std::exp(0.5 * h[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)]) * rng.normal();
      for (int j = 0; j < m; ++j) y(j) = forest_predict(draw.forests[static_cast<std::size_t>(j)], x);
      y += a0 * shock;
      for (int j = 0; j < m; ++j) out.at(static_cast<int>(d), s, j) = y(j);
      if (lags > 1) x.tail(m * (lags - 1)) = x.head(m * (lags - 1)).eval();
      x.head(m) = y;
    }
  });
  return out;
}

/// Mean squared error of point forecasts against outcomes.
inline double msfe(std::span<const double> forecasts, std::span<const double> outcomes) {
  if (forecasts.size() != outcomes.size()) throw runtime_error("forecast.length", "forecast/outcome lengths differ");
  if (forecasts.empty()) throw runtime_error("forecast.empty", "no forecasts to score");
  double s = 0.0;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const double e = forecasts[i] - outcomes[i];
    s += e * e;
  }
  return s / static_cast<double>(forecasts.size());
}

/// Sample CRPS: mean |x_i - y| - (1 / 2n^2) sum_ij |x_i - x_j|, with the
/// double sum evaluated in O(n log n) from the order statistics.
inline double crps(std::span<const double> samples, double outcome) {
  const std::size_t n = samples.size();
  if (n < 2) throw runtime_error("forecast.crps", "CRPS needs at least 2 samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  double abs_err = 0.0;
  double spread = 0.0;  // sum_{i<j} (x_(j) - x_(i)), taken from the minimum to avoid cancellation
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    abs_err += std::abs(x[i] - outcome);
    spread += (x[i] - x.front()) * (2.0 * static_cast<double>(i) - dn + 1.0);
  }
  return abs_err / dn - spread / (dn * dn);
}

/// Map level/slope/curvature draws to yields at the configured maturities.
inline PredictiveDraws ns_map_forecasts(const PredictiveDraws& factors, const NsCurveConfig& cfg) {
  if (factors.m != 3) throw runtime_error("ns.dimensions", "factor draws must have exactly 3 variables");
  const Eigen::MatrixXd L = ns_loading_matrix(cfg);
  PredictiveDraws out(factors.n_draws, factors.horizons, static_cast<int>(L.rows()));
  out.origin = factors.origin;
  for (double tau : cfg.maturities) out.names.push_back("m" + format_double(tau));
  for (int d = 0; d < factors.n_draws; ++d)
    for (int h = 0; h < factors.horizons; ++h) {
      const Eigen::Vector3d f(factors.at(d, h, 0), factors.at(d, h, 1), factors.at(d, h, 2));
      const Eigen::VectorXd y = L * f;
      for (int j = 0; j < out.m; ++j) out.at(d, h, j) = y(j);
    }
  return out;
}

}  // namespace bavart
