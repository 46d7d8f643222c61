#include <gtest/gtest.h>

#include "bavart/bavart.hpp"
#include "oracles.hpp"

using namespace bavart;

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Posterior mean with a batch-means Monte Carlo standard error.
struct Estimate {
  double mean = 0.0, se = 0.0;
};

Estimate batch_means(const std::vector<double>& x, int batches = 40) {
  const std::size_t len = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> b(static_cast<std::size_t>(batches), 0.0);
  for (std::size_t i = 0; i < len * static_cast<std::size_t>(batches); ++i) b[i / len] += x[i] / static_cast<double>(len);
  Estimate e;
  for (double v : b) e.mean += v / batches;
  double var = 0.0;
  for (double v : b) var += (v - e.mean) * (v - e.mean) / (batches - 1);
  e.se = std::sqrt(var / batches);
  return e;
}

struct ChainSummary {
  Estimate c, rho, sigma2;
};

ChainSummary run_chain(const std::vector<double>& e, SvState state, std::uint64_t seed, int burn, int iters) {
  Rng rng(seed);
  std::vector<double> c, rho, sigma2;
  for (int it = 0; it < burn + iters; ++it) {
    state = sample_sv(e, state, SvPrior{}, rng);
    if (it < burn) continue;
    c.push_back(state.c);
    rho.push_back(state.rho);
    sigma2.push_back(state.sigma2);
  }
  return {batch_means(c), batch_means(rho), batch_means(sigma2)};
}

double combined_se(const Estimate& a, const Estimate& b) { return std::sqrt(a.se * a.se + b.se * b.se); }

}  // namespace

TEST(SvPrior, PersistencePriorMean) {
  const SvPrior p;
  EXPECT_DOUBLE_EQ(2.0 * p.rho_a / (p.rho_a + p.rho_b) - 1.0, 2.0 / 3.0);
  EXPECT_EQ(p.c_var, 100.0);
  EXPECT_EQ(p.sigma2_shape, 0.5);
  EXPECT_EQ(p.sigma2_rate, 0.5);
  EXPECT_EQ(p.offset, 1e-10);
}

TEST(SvMixture, MatchesLogChiSquareMoments) {
  // log chi^2_1 has mean psi(1/2) + log 2 and variance pi^2 / 2.
  using M = LogChi2Mixture;
  double w = 0.0, m = 0.0, v = 0.0;
  for (std::size_t k = 0; k < 10; ++k) {
    w += M::prob[k];
    m += M::prob[k] * M::mean[k];
  }
  for (std::size_t k = 0; k < 10; ++k) v += M::prob[k] * (M::var[k] + (M::mean[k] - m) * (M::mean[k] - m));
  EXPECT_NEAR(w, 1.0, 1e-4);
  EXPECT_NEAR(m, -1.2703628454614782, 2e-3);
  EXPECT_NEAR(v, std::numbers::pi * std::numbers::pi / 2.0, 2e-2);
}

TEST(SvSampler, StationarityAndPositivity) {
  const SimulatedSv sim = simulate_sv(SvSpec{-1.0, 0.95, 0.2, 300, 3});
  const auto e = to_vector(sim.residuals);
  SvState s = SvState::constant(300, -1.0);
  Rng rng(4);
  for (int it = 0; it < 1000; ++it) {
    s = sample_sv(e, s, SvPrior{}, rng);
    ASSERT_LT(std::abs(s.rho), 1.0);
    ASSERT_GT(s.sigma2, 0.0);
    ASSERT_TRUE(s.h.allFinite());
    ASSERT_TRUE((s.h.array().exp() > 0.0).all());
  }
}

TEST(SvSampler, ZeroResidualsAreGuarded) {
  const std::vector<double> e(100, 0.0);
  SvState s = SvState::constant(100, 0.0);
  Rng rng(5);
  for (int it = 0; it < 50; ++it) s = sample_sv(e, s, SvPrior{}, rng);
  EXPECT_TRUE(s.h.allFinite());
  EXPECT_LT(s.c, -10.0);
}

TEST(SvSampler, ScalingShiftsLevelOnly) {
  const SimulatedSv sim = simulate_sv(SvSpec{-1.0, 0.95, 0.2, 500, 6});
  const double k = std::exp(1.0);
  const auto e = to_vector(sim.residuals);
  const auto ek = to_vector(sim.residuals * k);
  const SvState start = SvState::constant(500, -1.0);
  SvState shifted = start;
  shifted.c += 2.0;
  shifted.h0 += 2.0;
  shifted.h.array() += 2.0;
  // The chains see different data, so they decouple after a few sweeps even
  // with the same seed; agreement is judged against Monte Carlo error.
  const auto a = run_chain(e, start, 7, 1000, 12000);
  const auto b = run_chain(ek, shifted, 7, 1000, 12000);
  EXPECT_NEAR(b.c.mean - a.c.mean, 2.0 * std::log(k), 4.0 * combined_se(a.c, b.c));
  EXPECT_NEAR(b.rho.mean, a.rho.mean, 4.0 * combined_se(a.rho, b.rho));
  EXPECT_NEAR(b.sigma2.mean, a.sigma2.mean, 4.0 * combined_se(a.sigma2, b.sigma2));
  EXPECT_LT(combined_se(a.sigma2, b.sigma2), 0.05);
}

TEST(SvSampler, ConstantVarianceMatchesGridPosterior) {
  Rng data_rng(8);
  const int n = 200;
  const double true_c = 0.7;
  std::vector<double> e(n);
  for (double& v : e) v = data_rng.normal(0.0, std::exp(0.5 * true_c));

  // Exact posterior of c with e_t ~ N(0, exp(c)) and c ~ N(0, 100), on a grid.
  double ss = 0.0;
  for (double v : e) ss += v * v;
  const int g = 20001;
  std::vector<double> grid(g), logp(g);
  double mx = -1e300;
  for (int i = 0; i < g; ++i) {
    grid[static_cast<std::size_t>(i)] = -2.0 + 5.0 * i / (g - 1);
    const double c = grid[static_cast<std::size_t>(i)];
    logp[static_cast<std::size_t>(i)] = -0.5 * c * c / 100.0 - 0.5 * n * c - 0.5 * ss * std::exp(-c);
    mx = std::max(mx, logp[static_cast<std::size_t>(i)]);
  }
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < g; ++i) {
    const double p = std::exp(logp[static_cast<std::size_t>(i)] - mx);
    z += p;
    m1 += p * grid[static_cast<std::size_t>(i)];
    m2 += p * grid[static_cast<std::size_t>(i)] * grid[static_cast<std::size_t>(i)];
  }
  const double mean = m1 / z, sd = std::sqrt(m2 / z - mean * mean);

  SvState s = SvState::constant(n, 0.0);
  Rng rng(9);
  std::vector<double> draws;
  for (int it = 0; it < 22000; ++it) {
    s = sample_constant_volatility(e, s, SvPrior{}, rng);
    if (it >= 2000) draws.push_back(s.c);
  }
  double dm = 0.0;
  for (double d : draws) dm += d;
  dm /= static_cast<double>(draws.size());
  double dv = 0.0;
  for (double d : draws) dv += (d - dm) * (d - dm);
  const double dsd = std::sqrt(dv / static_cast<double>(draws.size() - 1));
  EXPECT_NEAR(dm, mean, 0.15 * sd);
  EXPECT_NEAR(dsd, sd, 0.1 * sd);
  EXPECT_EQ(s.rho, 0.0);
  EXPECT_EQ(s.sigma2, 0.0);
}

TEST(SvForecast, AtTheMeanStaysAtTheMean) {
  SvState s = SvState::constant(10, -0.5, 0.9, 0.04);
  Rng rng(10);
  const int n = 100000, horizon = 5;
  std::vector<double> sum(horizon, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto path = forecast_volatility(s, horizon, rng);
    for (int h = 0; h < horizon; ++h) sum[static_cast<std::size_t>(h)] += path[static_cast<std::size_t>(h)];
  }
  for (int h = 0; h < horizon; ++h) {
    const double var = 0.04 * (1.0 - std::pow(0.81, h + 1)) / (1.0 - 0.81);
    EXPECT_NEAR(sum[static_cast<std::size_t>(h)] / n, -0.5, 4.0 * std::sqrt(var / n));
  }
}

TEST(SvForecast, NoPersistenceIsIid) {
  SvState s = SvState::constant(10, 1.0, 0.0, 0.25);
  s.h(9) = 4.0;
  Rng rng(11);
  const int n = 100000;
  double m1 = 0.0, m2 = 0.0, s1 = 0.0, s2 = 0.0, cross = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto path = forecast_volatility(s, 2, rng);
    m1 += path[0];
    s1 += path[0] * path[0];
    m2 += path[1];
    s2 += path[1] * path[1];
    cross += path[0] * path[1];
  }
  m1 /= n;
  m2 /= n;
  const double v1 = s1 / n - m1 * m1, v2 = s2 / n - m2 * m2;
  const double se = std::sqrt(0.25 / n);
  EXPECT_NEAR(m1, 1.0, 4.0 * se);
  EXPECT_NEAR(m2, 1.0, 4.0 * se);
  EXPECT_NEAR(v1, 0.25, 0.01);
  EXPECT_NEAR(v2, 0.25, 0.01);
  EXPECT_NEAR((cross / n - m1 * m2) / std::sqrt(v1 * v2), 0.0, 4.0 / std::sqrt(n));
}

TEST(SvForecast, AnalyticAr1Mean) {
  const double c = -1.0, rho = 0.8, s2 = 0.09, hT = 1.5;
  SvState s = SvState::constant(5, c, rho, s2);
  s.h(4) = hT;
  Rng rng(12);
  const int n = 100000, horizon = 6;
  std::vector<double> sum(horizon, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto path = forecast_volatility(s, horizon, rng);
    for (int h = 0; h < horizon; ++h) sum[static_cast<std::size_t>(h)] += path[static_cast<std::size_t>(h)];
  }
  for (int h = 1; h <= horizon; ++h) {
    const double mean = c + std::pow(rho, h) * (hT - c);
    const double var = s2 * (1.0 - std::pow(rho * rho, h)) / (1.0 - rho * rho);
    EXPECT_NEAR(sum[static_cast<std::size_t>(h - 1)] / n, mean, 4.0 * std::sqrt(var / n)) << "horizon " << h;
  }
  EXPECT_THROW(forecast_volatility(s, 0, rng), Error);
}
