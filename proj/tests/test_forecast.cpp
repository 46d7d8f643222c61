#include <gtest/gtest.h>

#include <algorithm>

#include "bavart/bavart.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bavart;

TEST(Predict, ZeroSystemIsExactlyZero) {
  const double off = -1e300;  // exp(h / 2) underflows to exactly zero
  const auto post = fixture::repeated_draw({{DecisionTree{}}, {DecisionTree{}}}, {Eigen::VectorXd(0), Eigen::VectorXd::Zero(1)},
                                           {fixture::sv_state(off, 0.0, 0.0, off), fixture::sv_state(off, 0.0, 0.0, off)}, 20);
  const auto p = predict(post, Eigen::MatrixXd::Ones(3, 2), 4, 1);
  for (double v : p.values) EXPECT_EQ(v, 0.0);
}

TEST(Predict, OneStepMomentsOfAFixedDraw) {
  // f_1 = 1 + (x_1 > 0 ? 1 : -1) * 0.5; f_2 = -0.3 constant.
  std::vector<DecisionTree> f1{DecisionTree(1.0), fixture::step(0, 0.0, -0.5, 0.5)};
  std::vector<DecisionTree> f2{DecisionTree(-0.3)};
  const double a21 = 0.6;
  const auto s1 = fixture::sv_state(-1.0, 0.9, 0.04, -0.5), s2 = fixture::sv_state(0.0, 0.5, 0.01, 0.2);
  const int n = 50000;
  const auto post = fixture::repeated_draw({f1, f2}, {Eigen::VectorXd(0), Eigen::VectorXd::Constant(1, a21)}, {s1, s2}, n);
  Eigen::MatrixXd hist(2, 2);
  hist << 0.0, 0.0, 2.0, 1.0;
  const auto p = predict(post, hist, 1, 7);

  // E[exp(h_{T+1})] for a Gaussian AR(1) step.
  auto e_var = [](const SvState& s) { return std::exp(s.c + s.rho * (s.h(0) - s.c) + 0.5 * s.sigma2); };
  Eigen::Matrix2d A0;
  A0 << 1.0, 0.0, a21, 1.0;
  const Eigen::Matrix2d cov = A0 * Eigen::Vector2d(e_var(s1), e_var(s2)).asDiagonal() * A0.transpose();
  const Eigen::Vector2d mean(1.5, -0.3);

  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (int d = 0; d < n; ++d) {
    const Eigen::Vector2d y(p.at(d, 0, 0), p.at(d, 0, 1));
    m += y / n;
    c += y * y.transpose() / n;
  }
  c -= m * m.transpose();
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(m(j), mean(j), 4.0 * std::sqrt(cov(j, j) / n));
  // Log-normal volatility makes fourth moments heavier than Gaussian; 5% is several standard errors here.
  EXPECT_LT((c - cov).cwiseAbs().maxCoeff(), 0.05 * cov.maxCoeff());
}

TEST(Predict, MultiStepFeedsBackSimulatedValues) {
  // Deterministic system: f_1(x) = 1 if x_1 <= 0.5 else -1; no noise.
  const double off = -1e300;
  const auto post = fixture::repeated_draw({{fixture::step(0, 0.5, 1.0, -1.0)}}, {Eigen::VectorXd(0)},
                                           {fixture::sv_state(off, 0.0, 0.0, off)}, 2);
  const auto p = predict(post, Eigen::MatrixXd::Zero(1, 1), 5, 3);
  const std::vector<double> expect{1.0, -1.0, 1.0, -1.0, 1.0};
  for (int h = 0; h < 5; ++h) EXPECT_EQ(p.at(0, h, 0), expect[static_cast<std::size_t>(h)]);
}

TEST(Predict, SecondLagEntersThroughShiftedLagVector) {
  // f(x) = x_2 (value two periods back) approximated exactly on {0, 1}.
  const double off = -1e300;
  const auto post = fixture::repeated_draw({{fixture::step(1, 0.5, 0.0, 1.0)}}, {Eigen::VectorXd(0)},
                                           {fixture::sv_state(off, 0.0, 0.0, off)}, 1, 2);
  Eigen::MatrixXd hist(2, 1);
  hist << 1.0, 0.0;  // y_{T-1} = 1, y_T = 0
  const auto p = predict(post, hist, 4, 3);
  const std::vector<double> expect{1.0, 0.0, 1.0, 0.0};
  for (int h = 0; h < 4; ++h) EXPECT_EQ(p.at(0, h, 0), expect[static_cast<std::size_t>(h)]);
}

TEST(Predict, Errors) {
  const auto post = fixture::repeated_draw({{DecisionTree{}}}, {Eigen::VectorXd(0)}, {fixture::sv_state(0, 0, 0, 0)}, 1);
  EXPECT_THROW(predict(post, Eigen::MatrixXd::Zero(2, 1), 0, 1), Error);
  EXPECT_THROW(predict(post, Eigen::MatrixXd::Zero(2, 2), 1, 1), Error);
  EXPECT_THROW(predict(PosteriorDraws{}, Eigen::MatrixXd::Zero(2, 1), 1, 1), Error);
}

TEST(Predict, IndependentOfThreadCount) {
  std::vector<DecisionTree> f1{fixture::step(0, 0.0, -0.5, 0.5)};
  const auto post = fixture::repeated_draw({f1}, {Eigen::VectorXd(0)}, {fixture::sv_state(-1.0, 0.9, 0.1, -1.0)}, 101);
  const auto a = predict(post, Eigen::MatrixXd::Zero(2, 1), 6, 9, 1);
  const auto b = predict(post, Eigen::MatrixXd::Zero(2, 1), 6, 9, 4);
  EXPECT_EQ(a.values, b.values);
}

TEST(Msfe, Examples) {
  const std::vector<double> y{1.0, 3.0};
  EXPECT_EQ(msfe(y, y), 0.0);
  EXPECT_EQ(msfe(std::vector<double>{0.0, 0.0}, y), 5.0);
  Rng rng(4);
  std::vector<double> f(37), o(37);
  double by_hand = 0.0;
  for (std::size_t i = 0; i < 37; ++i) {
    f[i] = rng.normal();
    o[i] = rng.normal(1.0, 2.0);
    by_hand += (f[i] - o[i]) * (f[i] - o[i]);
  }
  EXPECT_NEAR(msfe(f, o), by_hand / 37.0, 1e-14);
  EXPECT_THROW(msfe(std::vector<double>{}, std::vector<double>{}), Error);
  EXPECT_THROW(msfe(std::vector<double>{1.0}, y), Error);
}

TEST(Crps, Examples) {
  EXPECT_EQ(crps(std::vector<double>(10, 0.7), 0.7), 0.0);
  EXPECT_EQ(crps(std::vector<double>{0.0, 2.0}, 1.0), 0.5);
  EXPECT_THROW(crps(std::vector<double>{1.0}, 1.0), Error);
}

TEST(Crps, MatchesDoubleSumAndInvariances) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(2 + rng.index(300));
    for (double& v : x) v = rng.normal(0.0, 3.0);
    const double y = rng.normal(0.0, 3.0);
    const double c = crps(x, y);
    EXPECT_NEAR(c, oracle::crps_naive(x, y), 1e-10);
    EXPECT_GE(c, 0.0);
    std::vector<double> perm = x;
    std::reverse(perm.begin(), perm.end());
    std::rotate(perm.begin(), perm.begin() + static_cast<long>(perm.size() / 3), perm.end());
    EXPECT_NEAR(crps(perm, y), c, 1e-12);
    std::vector<double> shifted = x;
    for (double& v : shifted) v += 4.25;
    EXPECT_NEAR(crps(shifted, y + 4.25), c, 1e-11);
  }
}

TEST(Crps, GaussianClosedForm) {
  Rng rng(6);
  std::vector<double> x(100000);
  for (double& v : x) v = rng.normal();
  const double exact = oracle::gaussian_crps(0.0, 1.0, 0.3);
  EXPECT_LT(std::abs(crps(x, 0.3) - exact) / exact, 0.01);
  EXPECT_NEAR(gaussian_crps(0.4, 1.7, -0.2), oracle::gaussian_crps(0.4, 1.7, -0.2), 1e-15);
}

TEST(PointForecasts, AreMedians) {
  PredictiveDraws p(5, 1, 1);
  const std::vector<double> v{3.0, -1.0, 8.0, 0.5, 2.0};
  for (int d = 0; d < 5; ++d) p.at(d, 0, 0) = v[static_cast<std::size_t>(d)];
  EXPECT_EQ(point_forecasts(p)(0, 0), 2.0);
  EXPECT_EQ(median(std::vector<double>{1.0, 4.0}), 2.5);
}

TEST(Backtest, ScoredPointCounts) {
  EXPECT_EQ(backtest_counts(24, {1, 3}), (std::vector<int>{24, 22}));
  EXPECT_EQ(backtest_counts(5, {1, 6, 9}), (std::vector<int>{5, 0, 0}));
}

TEST(Backtest, ProtocolAndWhiteNoiseScores) {
  LinearVarSpec spec;
  spec.coefficients = (Eigen::MatrixXd(2, 2) << 0.5, 0.1, 0.0, 0.4).finished();
  spec.intercept = Eigen::Vector2d(1.0, -1.0);
  spec.impact = Eigen::Matrix2d::Identity();
  spec.variances = Eigen::Vector2d(0.3, 0.3);
  spec.length = 60;
  spec.seed = 7;
  const auto sim = simulate_linear_var(spec);
  ModelConfig cfg;
  cfg.trees = 5;
  cfg.sweeps = 40;
  cfg.burn_in = 20;
  BacktestSettings bt;
  bt.holdout = 6;
  bt.horizons = {1, 2};
  bt.reestimate_every = 3;
  const auto res = run_backtest(sim.data, cfg, bt);

  std::map<std::pair<std::string, int>, int> n;
  for (const auto& r : res.forecasts) {
    ++n[{r.series, r.horizon}];
    EXPECT_LT(r.origin + r.horizon, 60);
    EXPECT_GE(r.origin, 60 - 6 - 1);
    EXPECT_EQ(r.outcome, sim.data.values(r.origin + r.horizon, r.series == "y1" ? 0 : 1));
  }
  EXPECT_EQ((n[{"y1", 1}]), 6);
  EXPECT_EQ((n[{"y2", 2}]), 5);

  // White-noise benchmark recomputed from expanding-window means and sds.
  for (const auto& row : res.scores) {
    if (row.model != "white_noise") continue;
    const int j = row.series == "y1" ? 0 : 1;
    double se = 0.0, cr = 0.0;
    int count = 0;
    for (int end = 54; end + row.horizon - 1 < 60; ++end) {
      const Eigen::VectorXd w = sim.data.values.col(j).head(end);
      const double mu = w.mean();
      const double sd = std::sqrt((w.array() - mu).square().sum() / (end - 1));
      const double y = sim.data.values(end - 1 + row.horizon, j);
      se += (mu - y) * (mu - y);
      cr += oracle::gaussian_crps(mu, sd, y);
      ++count;
    }
    EXPECT_EQ(row.count, count);
    EXPECT_NEAR(row.msfe, se / count, 1e-12);
    EXPECT_NEAR(row.crps, cr / count, 1e-12);
  }
  EXPECT_EQ(res.scores.size(), 2u * 2u * 2u);
}

TEST(Backtest, NelsonSiegelModeScoresYields) {
  NsYieldSpec spec;
  spec.curve.maturities = {3.0, 12.0, 36.0, 120.0};
  spec.length = 50;
  spec.seed = 8;
  const auto sim = simulate_ns_yields(spec);
  ModelConfig cfg;
  cfg.trees = 5;
  cfg.sweeps = 30;
  cfg.burn_in = 10;
  cfg.lags = 2;
  BacktestSettings bt;
  bt.holdout = 3;
  bt.horizons = {1};
  bt.reestimate_every = 3;
  const auto res = run_backtest(sim.yields, cfg, bt, spec.curve);
  EXPECT_EQ(res.forecasts.size(), 3u * 4u);
  EXPECT_EQ(res.forecasts.front().series, sim.yields.names.front());
}

TEST(Backtest, Errors) {
  const TimeSeriesMatrix y{Eigen::MatrixXd::Random(40, 1), {"y"}, ""};
  ModelConfig cfg;
  BacktestSettings bt;
  bt.holdout = 30;
  EXPECT_THROW(run_backtest(y, cfg, bt), Error);
  bt.holdout = 5;
  bt.horizons = {0};
  EXPECT_THROW(run_backtest(y, cfg, bt), Error);
}
