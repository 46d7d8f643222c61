#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "bavart/bavart.hpp"
#include "oracles.hpp"

using namespace bavart;

TEST(Horseshoe, ConditionalParams) {
  const auto a = horseshoe_conditional_params(0.0, 1.0, 1.0);
  EXPECT_EQ(a.shape, 1.0);
  EXPECT_EQ(a.rate, 1.0);
  const auto b = horseshoe_conditional_params(2.0, 1.0, 1.0);
  EXPECT_EQ(b.shape, 1.0);
  EXPECT_EQ(b.rate, 3.0);
}

TEST(Horseshoe, ScalesStayPositive) {
  HorseshoeState s = HorseshoeState::initial(4);
  Rng rng(1);
  std::vector<Eigen::VectorXd> a{Eigen::VectorXd(0), Eigen::VectorXd::Constant(1, 0.3), Eigen::Vector2d(0.0, -2.0),
                                 Eigen::Vector3d(1e-8, 0.5, 5.0)};
  for (int it = 0; it < 2000; ++it) {
    sample_horseshoe(s, a, rng);
    ASSERT_GT(s.lambda2, 0.0);
    ASSERT_GT(s.xi, 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
      ASSERT_TRUE((s.tau2[j].array() > 0.0).all());
      ASSERT_TRUE((s.nu[j].array() > 0.0).all());
    }
  }
}

// Scalar a with y_i ~ N(a, 1), i = 1..n; a ~ N(0, lambda^2 tau^2) with
// half-Cauchy tau and lambda. The marginal of tau from the Gibbs chain is
// compared with a two-dimensional grid over (log tau, log lambda) after
// integrating a out analytically.
TEST(Horseshoe, LocalScaleMarginalMatchesGrid) {
  const int n = 5;
  const double ybar = 1.0;
  const Eigen::VectorXd r = Eigen::VectorXd::Constant(n, ybar);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Ones(n, 1);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);

  const int g = 1500;
  const double lo = -12.0, hi = 8.0, step = (hi - lo) / (g - 1);
  std::vector<double> tau_mass(g, 0.0);
  auto log_half_cauchy_log_scale = [](double u) {  // density of log s for s ~ C+(0,1)
    const double s = std::exp(u);
    return std::log(2.0 / std::numbers::pi) + u - std::log1p(s * s);
  };
  for (int i = 0; i < g; ++i) {
    const double lt = lo + i * step;
    for (int k = 0; k < g; ++k) {
      const double ll = lo + k * step;
      const double v = std::exp(2.0 * (lt + ll)) + 1.0 / n;
      const double lp = log_half_cauchy_log_scale(lt) + log_half_cauchy_log_scale(ll) - 0.5 * std::log(v) -
                        0.5 * ybar * ybar / v;
      tau_mass[static_cast<std::size_t>(i)] += std::exp(lp);
    }
  }
  double z = 0.0;
  for (double m : tau_mass) z += m;
  std::vector<double> cdf(g);
  double acc = 0.0;
  for (int i = 0; i < g; ++i) {
    acc += tau_mass[static_cast<std::size_t>(i)] / z;
    cdf[static_cast<std::size_t>(i)] = acc;
  }

  HorseshoeState s = HorseshoeState::initial(2);
  Rng rng(2);
  std::vector<double> log_tau;
  const int burn = 10000, iters = 1000000;
  for (int it = 0; it < burn + iters; ++it) {
    const Eigen::VectorXd a = sample_covariance_row(r, Z, w, s.prior_variances(1), rng);
    sample_horseshoe(s, {Eigen::VectorXd(0), a}, rng);
    if (it >= burn) log_tau.push_back(0.5 * std::log(s.tau2[1](0)));
  }
  std::sort(log_tau.begin(), log_tau.end());
  double ks = 0.0;
  for (int i = 0; i < g; ++i) {
    // Grid cell i covers log tau up to its midpoint with the next node.
    const double edge = lo + (i + 0.5) * step;
    const double emp = static_cast<double>(std::upper_bound(log_tau.begin(), log_tau.end(), edge) - log_tau.begin()) /
                       static_cast<double>(log_tau.size());
    ks = std::max(ks, std::abs(emp - cdf[static_cast<std::size_t>(i)]));
  }
  EXPECT_LT(ks, 0.02);
}

TEST(CovarianceRow, FirstEquationIsEmpty) {
  Rng rng(3);
  const Eigen::VectorXd draw = sample_covariance_row(Eigen::VectorXd::Ones(10), Eigen::MatrixXd(10, 0),
                                                     Eigen::VectorXd::Ones(10), Eigen::VectorXd(0), rng);
  EXPECT_EQ(draw.size(), 0);
}

TEST(CovarianceRow, FlatPriorOlsLimit) {
  Rng rng(4);
  Eigen::VectorXd r(30);
  for (Eigen::Index i = 0; i < 30; ++i) r(i) = rng.normal();
  const Eigen::MatrixXd Z = r;
  const auto post = covariance_row_posterior(r, Z, Eigen::VectorXd::Ones(30), Eigen::VectorXd::Constant(1, 1e14));
  EXPECT_NEAR(post.mean(0), 1.0, 1e-9);
  EXPECT_NEAR(post.cov(0, 0), 1.0 / r.squaredNorm(), 1e-12);
}

TEST(CovarianceRow, MatchesDenseGls) {
  Rng rng(5);
  const int T = 50;
  Eigen::MatrixXd Z(T, 2);
  Eigen::VectorXd r(T), w(T);
  for (int t = 0; t < T; ++t) {
    Z(t, 0) = rng.normal();
    Z(t, 1) = rng.normal() + 0.5 * Z(t, 0);
    w(t) = 0.2 + rng.uniform();
    r(t) = 0.4 * Z(t, 0) - 0.3 * Z(t, 1) + std::sqrt(w(t)) * rng.normal();
  }
  const Eigen::Vector2d d(0.5, 2.0);
  const Eigen::MatrixXd Winv = w.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd Dinv = d.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd V = (Z.transpose() * Winv * Z + Dinv).inverse();
  const Eigen::VectorXd mean = V * Z.transpose() * Winv * r;
  const auto post = covariance_row_posterior(r, Z, w, d);
  EXPECT_LT((post.mean - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((post.cov - V).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((post.cov - post.cov.transpose()).norm(), 1e-14);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(post.cov).eigenvalues().minCoeff(), 0.0);

  const int n = 100000;
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d a = sample_covariance_row(r, Z, w, d, rng);
    m += a / n;
    c += a * a.transpose() / n;
  }
  c -= m * m.transpose();
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(m(k), mean(k), 4.0 * std::sqrt(V(k, k) / n));
  EXPECT_LT((c - V).cwiseAbs().maxCoeff(), 0.03 * V.diagonal().maxCoeff());
}

TEST(CovarianceRow, DimensionErrors) {
  EXPECT_THROW(covariance_row_posterior(Eigen::VectorXd::Ones(5), Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(5),
                                        Eigen::VectorXd::Ones(1)),
               Error);
  EXPECT_THROW(covariance_row_posterior(Eigen::VectorXd::Ones(5), Eigen::MatrixXd::Ones(5, 1), Eigen::VectorXd::Zero(5),
                                        Eigen::VectorXd::Ones(1)),
               Error);
}

// With a zero true coefficient the horseshoe posterior mean (Rao-Blackwellised
// over the Gibbs chain) should be closer to zero than under a wide fixed prior.
TEST(CovarianceRow, HorseshoeShrinksNullCoefficients) {
  int smaller = 0;
  const int reps = 100, T = 500;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(100 + static_cast<std::uint64_t>(rep));
    Eigen::MatrixXd Z(T, 2);
    Eigen::VectorXd r(T);
    for (int t = 0; t < T; ++t) {
      Z(t, 0) = rng.normal();
      Z(t, 1) = rng.normal();
      r(t) = rng.normal();
    }
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(T);
    const auto wide = covariance_row_posterior(r, Z, w, Eigen::Vector2d::Constant(10.0));

    HorseshoeState s = HorseshoeState::initial(3);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    const int burn = 200, iters = 1000;
    for (int it = 0; it < burn + iters; ++it) {
      const Eigen::VectorXd a = sample_covariance_row(r, Z, w, s.prior_variances(2), rng);
      if (it >= burn) mean += covariance_row_posterior(r, Z, w, s.prior_variances(2)).mean / iters;
      sample_horseshoe(s, {Eigen::VectorXd(0), Eigen::VectorXd(0), a}, rng);
    }
    if (mean.cwiseAbs().sum() < wide.mean.cwiseAbs().sum()) ++smaller;
  }
  EXPECT_GE(smaller, 95);
}
