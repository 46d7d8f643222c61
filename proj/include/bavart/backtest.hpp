#pragma once

// Expanding-window pseudo out-of-sample evaluation. With a hold-out of H
// periods the first estimation window ends H periods before the end of the
// sample and grows by one period per origin; horizon h is scored at the
// H - h + 1 origins whose target still lies inside the sample.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bavart/data.hpp"
#include "bavart/error.hpp"
#include "bavart/forecast.hpp"
#include "bavart/sampler.hpp"

namespace bavart {

struct BacktestSettings {
  int holdout = 24;
  std::vector<int> horizons{1, 3};
  int reestimate_every = 1;      // refit every k-th origin, reuse the last fit in between
  std::uint64_t draws_seed = 7;  // predictive simulation seed (mixed with the origin)
};

/// One scored forecast.
struct ForecastRecord {
  long origin;  // last row of the estimation window
  int horizon;
  std::string series;
  double point;    // median of the predictive draws
  double outcome;
  double crps;
};

struct ScoreRow {
  std::string model;
  std::string series;
  int horizon;
  int count;
  double msfe;
  double crps;
};

struct BacktestResult {
  std::vector<ForecastRecord> forecasts;
  std::vector<ScoreRow> scores;
};

/// Closed-form CRPS of N(mean, sd^2) at y.
inline double gaussian_crps(double mean, double sd, double y) {
  const double z = (y - mean) / sd;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return sd * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

/// Number of scored points for each horizon.
inline std::vector<int> backtest_counts(int holdout, const std::vector<int>& horizons) {
  std::vector<int> out;
  for (int h : horizons) out.push_back(std::max(0, holdout - h + 1));
  return out;
}

/// Run the protocol on `data` (rows = time). With `ns` set, the columns are
/// yields at the configured maturities: the model is fitted to extracted
/// level/slope/curvature factors and its draws are mapped back to yields
/// before medians and scores are taken. A white-noise benchmark (Gaussian with
/// the window's sample mean and variance) is scored alongside.
inline BacktestResult run_backtest(const TimeSeriesMatrix& data, const ModelConfig& cfg, const BacktestSettings& bt,
                                   const std::optional<NsCurveConfig>& ns = std::nullopt) {
  data.validate();
  if (bt.holdout < 1) throw config_error("backtest.holdout", "hold-out length must be positive");
  if (bt.horizons.empty()) throw config_error("backtest.horizons", "at least one horizon is required");
  for (int h : bt.horizons)
    if (h < 1) throw config_error("backtest.horizons", "horizons must be positive");
  if (bt.reestimate_every < 1) throw config_error("backtest.reestimate_every", "re-estimation interval must be positive");
  const long T = static_cast<long>(data.rows());
  const long first_end = T - bt.holdout;  // rows [0, first_end) form the first window
  if (first_end <= cfg.lags + 20)
    throw config_error("backtest.holdout", "hold-out leaves too few observations for estimation");
  int max_h = 0;
  for (int h : bt.horizons) max_h = std::max(max_h, h);

  const TimeSeriesMatrix modeled = ns ? ns_extract_factors(data, *ns) : data;
  const int m_out = static_cast<int>(data.cols());

  BacktestResult res;
  std::vector<std::vector<std::vector<double>>> points(bt.horizons.size(), std::vector<std::vector<double>>(m_out));
  std::vector<std::vector<std::vector<double>>> score(bt.horizons.size(), std::vector<std::vector<double>>(m_out));
  std::vector<std::vector<std::vector<double>>> wn_points = points, wn_score = score;

  std::optional<PosteriorDraws> post;
  for (int i = 0; i < bt.holdout; ++i) {
    const long end = first_end + i;  // window rows [0, end)
    const long origin = end - 1;
    if (!post || i % bt.reestimate_every == 0) post = estimate(modeled.head(end), cfg);
    const TimeSeriesMatrix hist = modeled.head(end).select(post->names);
    PredictiveDraws pd = predict(*post, hist.values, max_h, stream_seed(bt.draws_seed, static_cast<std::uint64_t>(origin)),
                                 cfg.threads);
    if (ns) {
      pd = ns_map_forecasts(pd, *ns);
    } else {
      // Back to data column order.
      PredictiveDraws re(pd.n_draws, pd.horizons, pd.m);
      re.names = data.names;
      re.origin = pd.origin;
      for (int j = 0; j < pd.m; ++j) {
        const auto src = std::find(pd.names.begin(), pd.names.end(), data.names[static_cast<std::size_t>(j)]) - pd.names.begin();
        for (int d = 0; d < pd.n_draws; ++d)
          for (int h = 0; h < pd.horizons; ++h) re.at(d, h, j) = pd.at(d, h, static_cast<int>(src));
      }
      pd = std::move(re);
    }

    const Eigen::MatrixXd window = data.values.topRows(end);
    const Eigen::RowVectorXd mean = window.colwise().mean();
    const Eigen::RowVectorXd sd =
        ((window.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(std::max<long>(end - 1, 1))).sqrt();

    for (std::size_t hi = 0; hi < bt.horizons.size(); ++hi) {
      const int h = bt.horizons[hi];
      const long target = origin + h;
      if (target >= T) continue;
      for (int j = 0; j < m_out; ++j) {
        const std::vector<double> cell = pd.cell(h - 1, j);
        const double y = data.values(target, j);
        const double point = median(cell);
        const double c = crps(cell, y);
        res.forecasts.push_back({origin, h, data.names[static_cast<std::size_t>(j)], point, y, c});
        points[hi][static_cast<std::size_t>(j)].push_back(point);
        score[hi][static_cast<std::size_t>(j)].push_back(c);
        wn_points[hi][static_cast<std::size_t>(j)].push_back(mean(j));
        wn_score[hi][static_cast<std::size_t>(j)].push_back(gaussian_crps(mean(j), std::max(sd(j), 1e-12), y));
      }
    }
  }

  // Outcomes aligned with the stored point forecasts.
  auto outcomes = [&](int h, int j) {
    std::vector<double> y;
    for (long origin = first_end - 1; origin + h < T; ++origin) y.push_back(data.values(origin + h, j));
    return y;
  };
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (const char* model : {"bavart", "white_noise"}) {
    const bool wn = std::string(model) == "white_noise";
    for (std::size_t hi = 0; hi < bt.horizons.size(); ++hi)
      for (int j = 0; j < m_out; ++j) {
        const auto& pts = (wn ? wn_points : points)[hi][static_cast<std::size_t>(j)];
        const auto& cs = (wn ? wn_score : score)[hi][static_cast<std::size_t>(j)];
        if (pts.empty()) continue;
        const auto y = outcomes(bt.horizons[hi], j);
        res.scores.push_back({model, data.names[static_cast<std::size_t>(j)], bt.horizons[hi], static_cast<int>(pts.size()),
                              msfe(pts, y), mean_of(cs)});
      }
  }
  return res;
}

}  // namespace bavart
