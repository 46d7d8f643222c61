#include <gtest/gtest.h>

#include "bavart/bavart.hpp"
#include "fixtures.hpp"

using namespace bavart;

namespace {

// Three variables; nonlinear mean in the first equation, constant elsewhere.
PosteriorDraws three_variable_draw(int copies = 3) {
  std::vector<DecisionTree> f1{fixture::step(0, 0.0, -0.4, 0.6), fixture::step(2, 1.0, 0.1, -0.2)};
  std::vector<DecisionTree> f2{fixture::step(0, 0.2, 0.0, 0.9)};
  std::vector<DecisionTree> f3{fixture::step(1, 0.0, 0.3, -0.3)};
  return fixture::repeated_draw({f1, f2, f3}, {Eigen::VectorXd(0), Eigen::VectorXd::Constant(1, 0.5), Eigen::Vector2d(0.3, -0.4)},
                                {fixture::sv_state(0.8, 0.9, 0.1, 2.0), fixture::sv_state(-1.0, 0.5, 0.1, 0.0),
                                 fixture::sv_state(0.0, 0.0, 0.0, 0.0)},
                                copies);
}

Eigen::Matrix3d impact_of(const PosteriorDraws& post) { return impact_matrix(post.draws.front().a); }

}  // namespace

TEST(Girf, OneStdDevImpactIsScaledImpactColumn) {
  const auto post = three_variable_draw();
  GirfSpec spec;
  spec.shock = 0;
  spec.horizons = 4;
  const auto r = girf(post, Eigen::MatrixXd::Zero(2, 3), spec);
  const Eigen::Vector3d expect = impact_of(post).col(0) * std::sqrt(std::exp(0.8));
  for (int d = 0; d < r.n_draws; ++d)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(r.at(d, 0, j), expect(j), 1e-15);
}

TEST(Girf, UnitImpactIsImpactColumn) {
  const auto post = three_variable_draw();
  GirfSpec spec;
  spec.shock = 1;
  spec.size = ShockSize::Unit;
  const auto r = girf(post, Eigen::MatrixXd::Zero(2, 3), spec);
  const Eigen::Vector3d expect = impact_of(post).col(1);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(r.at(0, 0, j), expect(j));
  EXPECT_EQ(r.horizons, 24);
}

TEST(Girf, ConstantMeansGiveNoPropagation) {
  const auto post = fixture::repeated_draw({{DecisionTree(0.5)}, {DecisionTree(-1.0)}}, {Eigen::VectorXd(0), Eigen::VectorXd::Constant(1, 0.7)},
                                           {fixture::sv_state(0.0, 0.0, 0.0, 0.0), fixture::sv_state(0.0, 0.0, 0.0, 0.0)}, 1);
  GirfSpec spec;
  spec.horizons = 6;
  const auto r = girf(post, Eigen::MatrixXd::Zero(1, 2), spec);
  EXPECT_EQ(r.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.at(0, 0, 1), 0.7);
  for (int h = 1; h < 6; ++h)
    for (int j = 0; j < 2; ++j) EXPECT_EQ(r.at(0, h, j), 0.0);
}

TEST(Girf, ResponseDependsOnTheState) {
  // f(x) = 1 if x <= 0 else -1: the same shock moves the next value up or
  // down depending on which side of the threshold the shocked path lands.
  const auto post = fixture::repeated_draw({{fixture::step(0, 0.0, 1.0, -1.0)}}, {Eigen::VectorXd(0)},
                                           {fixture::sv_state(0.0, 0.0, 0.0, 0.0)}, 1);
  GirfSpec spec;
  spec.size = ShockSize::Unit;
  spec.horizons = 2;
  // From y_T = 5: baseline y_{T+1} = -1; shocked = 0 -> next value 1 vs 1.
  const auto a = girf(post, Eigen::MatrixXd::Constant(1, 1, 5.0), spec);
  EXPECT_EQ(a.at(0, 1, 0), 0.0);
  // From y_T = -5: baseline y_{T+1} = 1; shocked = 2 -> next value -1 vs -1.
  const auto b = girf(post, Eigen::MatrixXd::Constant(1, 1, -5.0), spec);
  EXPECT_EQ(b.at(0, 1, 0), 0.0);
  // A shock of 2 from y_T = 5: baseline -1 -> 1; shocked 1 -> -1.
  GirfSpec big = spec;
  big.size = ShockSize::OneStdDev;
  const auto post2 = fixture::repeated_draw({{fixture::step(0, 0.0, 1.0, -1.0)}}, {Eigen::VectorXd(0)},
                                            {fixture::sv_state(2.0 * std::log(2.0), 0.0, 0.0, 0.0)}, 1);
  const auto c = girf(post2, Eigen::MatrixXd::Constant(1, 1, 5.0), big);
  EXPECT_DOUBLE_EQ(c.at(0, 0, 0), 2.0);
  EXPECT_EQ(c.at(0, 1, 0), -2.0);
}

TEST(Girf, RestrictedVariablesAreExactlyZero) {
  const auto post = three_variable_draw();
  GirfSpec spec;
  spec.shock = 0;
  spec.restricted = {2};
  spec.horizons = 8;
  const auto r = girf(post, Eigen::MatrixXd::Constant(2, 3, 0.3), spec);
  for (int d = 0; d < r.n_draws; ++d)
    for (int h = 0; h < 8; ++h) EXPECT_EQ(r.at(d, h, 2), 0.0);
  // The unrestricted impact is unchanged.
  EXPECT_NEAR(r.at(0, 0, 1), impact_of(post)(1, 0) * std::sqrt(std::exp(0.8)), 1e-15);
}

TEST(Girf, LevelRestrictionMovesToZeroThenStays) {
  const auto post = three_variable_draw();
  GirfSpec spec;
  spec.shock = 0;
  spec.restricted = {2};
  spec.origin_levels = Eigen::Vector3d(1.0, 2.0, 0.25);
  spec.horizons = 5;
  const auto r = girf(post, Eigen::MatrixXd::Zero(2, 3), spec);
  for (int h = 0; h < 5; ++h) EXPECT_EQ(r.at(0, h, 2), 0.0);
}

TEST(Girf, LevelPinFeedsTheLagVector) {
  // f_1 depends on the second variable's lag; pinning y2 at -level vs 0 changes the baseline
  // but not the response, as both paths share it.
  std::vector<DecisionTree> f1{fixture::step(1, -0.5, 3.0, 0.0)};
  std::vector<DecisionTree> f2{DecisionTree(0.0)};
  const auto post = fixture::repeated_draw({f1, f2}, {Eigen::VectorXd(0), Eigen::VectorXd::Zero(1)},
                                           {fixture::sv_state(0.0, 0.0, 0.0, 0.0), fixture::sv_state(0.0, 0.0, 0.0, 0.0)}, 1);
  GirfSpec spec;
  spec.restricted = {1};
  spec.origin_levels = Eigen::Vector2d(0.0, 1.0);
  spec.horizons = 3;
  const auto r = girf(post, Eigen::MatrixXd::Zero(1, 2), spec);
  EXPECT_EQ(r.at(0, 0, 0), 1.0);
  for (int h = 1; h < 3; ++h) EXPECT_EQ(r.at(0, h, 0), 0.0);
}

TEST(Girf, OriginSelectsConditioningRow) {
  const auto post = fixture::repeated_draw({{fixture::step(0, 0.0, 1.0, -1.0)}}, {Eigen::VectorXd(0)},
                                           {fixture::sv_state(2.0 * std::log(2.0), 0.0, 0.0, 0.0)}, 1);
  Eigen::MatrixXd hist(3, 1);
  hist << 5.0, -5.0, 5.0;
  GirfSpec spec;
  spec.horizons = 2;
  spec.origin = 1;  // y = -5: baseline 1 -> -1; shocked 3 -> -1
  const auto r = girf(post, hist, spec);
  EXPECT_EQ(r.origin, 1);
  EXPECT_EQ(r.at(0, 1, 0), 0.0);
  spec.origin = 2;
  EXPECT_EQ(girf(post, hist, spec).at(0, 1, 0), -2.0);
  spec.origin = 3;
  EXPECT_THROW(girf(post, hist, spec), Error);
}

TEST(Girf, DeterministicAndThreadIndependent) {
  const auto post = three_variable_draw(40);
  GirfSpec spec;
  spec.shock = 2;
  const Eigen::MatrixXd hist = Eigen::MatrixXd::Constant(2, 3, -0.1);
  const auto a = girf(post, hist, spec, 1);
  const auto b = girf(post, hist, spec, 3);
  EXPECT_EQ(a.values, b.values);
}

TEST(Girf, SpecErrors) {
  const auto post = three_variable_draw();
  const Eigen::MatrixXd hist = Eigen::MatrixXd::Zero(2, 3);
  GirfSpec spec;
  spec.restricted = {0};
  try {
    girf(post, hist, spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.key(), "girf.restricted");
  }
  spec.restricted = {3};
  EXPECT_THROW(girf(post, hist, spec), Error);
  spec.restricted.clear();
  spec.shock = 5;
  EXPECT_THROW(girf(post, hist, spec), Error);
  spec.shock = 0;
  spec.horizons = 0;
  EXPECT_THROW(girf(post, hist, spec), Error);
  spec.horizons = 3;
  spec.origin_levels = Eigen::Vector2d::Zero();
  EXPECT_THROW(girf(post, hist, spec), Error);
}

TEST(Girf, ReportingQuantiles) { EXPECT_EQ(girf_quantiles(), (std::vector<double>{0.16, 0.25, 0.5, 0.75, 0.84})); }

TEST(Girf, HomogeneousInShockSizeOnStumps) {
  const auto stumps = [](double c) {
    return fixture::repeated_draw({{DecisionTree(0.2)}, {DecisionTree(-0.1)}}, {Eigen::VectorXd(0), Eigen::VectorXd::Constant(1, -0.8)},
                                  {fixture::sv_state(c, 0.0, 0.0, 0.0), fixture::sv_state(0.0, 0.0, 0.0, 0.0)}, 2);
  };
  GirfSpec spec;
  spec.horizons = 5;
  const auto one = girf(stumps(0.0), Eigen::MatrixXd::Zero(1, 2), spec);
  const auto two = girf(stumps(std::log(4.0)), Eigen::MatrixXd::Zero(1, 2), spec);
  for (int h = 0; h < 5; ++h)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(two.at(1, h, j), 2.0 * one.at(1, h, j), 1e-15);
}
