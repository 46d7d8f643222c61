#pragma once

// Generalised impulse responses: per posterior draw, the difference between
// a path hit by one structural shock at impact and a baseline path with all
// shocks at zero, both with H fixed at its unconditional mean diag(e^{c_j}).
// Optionally some variables are pinned at zero along both paths.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bavart/error.hpp"
#include "bavart/forecast.hpp"
#include "bavart/sampler.hpp"

namespace bavart {

enum class ShockSize { OneStdDev, Unit };

struct GirfSpec {
  int shock = 0;
  ShockSize size = ShockSize::OneStdDev;
  int horizons = 24;            // response at impact is horizon 0
  std::vector<int> restricted;  // variables held at 0 in both paths
  long origin = -1;             // last history row used; -1 = final row
  // When the model runs on first differences and the restriction should pin
  // levels, the levels at the origin (one per variable). Empty: pin the
  // modeled series itself.
  Eigen::VectorXd origin_levels;

  void validate(int m) const {
    if (shock < 0 || shock >= m) throw config_error("girf.shock", "shock index out of range");
    if (horizons < 1) throw config_error("girf.horizons", "horizon must be at least 1");
    for (int r : restricted) {
      if (r < 0 || r >= m) throw config_error("girf.restricted", "restricted index out of range");
      if (r == shock) throw config_error("girf.restricted", "shocked variable cannot be restricted");
    }
    if (origin_levels.size() != 0 && origin_levels.size() != m)
      throw config_error("girf.zlb_space", "origin levels must have one entry per variable");
  }
};

/// Responses: draws x horizons x variables.
inline PredictiveDraws girf(const PosteriorDraws& post, const Eigen::MatrixXd& history, const GirfSpec& spec,
                            unsigned threads = 1) {
  const int m = post.m();
  spec.validate(m);
  if (post.draws.empty()) throw runtime_error("girf.draws", "no posterior draws");
  const long last = spec.origin < 0 ? static_cast<long>(history.rows()) - 1 : spec.origin;
  if (last >= history.rows() || last + 1 < post.lags)
    throw config_error("girf.origin", "conditioning date outside the sample");
  const Eigen::VectorXd x0 = lag_vector(history.topRows(last + 1), post.lags);

  PredictiveDraws out(static_cast<int>(post.draws.size()), spec.horizons, m);
  out.names = post.names;
  out.origin = last;
  const int lags = post.lags;

  parallel_for(post.draws.size(), threads, [&](std::size_t d) {
    const PosteriorDraw& draw = post.draws[d];
    const auto& sv = draw.sv[static_cast<std::size_t>(spec.shock)];
    const double delta = spec.size == ShockSize::OneStdDev ? std::sqrt(std::exp(sv.c)) : 1.0;
    const Eigen::VectorXd impact = impact_matrix(draw.a).col(spec.shock) * delta;
    Eigen::VectorXd xs = x0, xb = x0, ys(m), yb(m);
    for (int h = 0; h < spec.horizons; ++h) {
      for (int j = 0; j < m; ++j) {
        const auto& forest = draw.forests[static_cast<std::size_t>(j)];
        ys(j) = forest_predict(forest, xs);
        yb(j) = forest_predict(forest, xb);
      }
      if (h == 0) ys += impact;
      for (int r : spec.restricted) {
        // In level mode the first step moves the level to zero, after which the change is zero.
        const double pinned = spec.origin_levels.size() != 0 && h == 0 ? -spec.origin_levels(r) : 0.0;
        ys(r) = yb(r) = pinned;
      }
      for (int j = 0; j < m; ++j) out.at(static_cast<int>(d), h, j) = ys(j) - yb(j);
      if (lags > 1) {
        xs.tail(m * (lags - 1)) = xs.head(m * (lags - 1)).eval();
        xb.tail(m * (lags - 1)) = xb.head(m * (lags - 1)).eval();
      }
      xs.head(m) = ys;
      xb.head(m) = yb;
    }
  });
  return out;
}

/// Percentile bands used for reporting (16/25/50/75/84).
inline const std::vector<double>& girf_quantiles() {
  static const std::vector<double> q{0.16, 0.25, 0.50, 0.75, 0.84};
  return q;
}

}  // namespace bavart
