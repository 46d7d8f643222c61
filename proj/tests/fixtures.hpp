#pragma once

// Hand-built posterior draws with known parameters.

#include <Eigen/Dense>

#include <vector>

#include "bavart/bavart.hpp"

namespace fixture {

/// One draw per entry of `copies`, each with the same forests, covariance
/// rows and volatility states.
inline bavart::PosteriorDraws repeated_draw(const std::vector<std::vector<bavart::DecisionTree>>& forests,
                                            const std::vector<Eigen::VectorXd>& a, const std::vector<bavart::SvState>& sv,
                                            int copies, int lags = 1) {
  bavart::PosteriorDraws post;
  post.lags = lags;
  const int m = static_cast<int>(forests.size());
  post.n_covariates = m * lags;
  for (int j = 0; j < m; ++j) post.names.push_back("v" + std::to_string(j + 1));
  bavart::PosteriorDraw d;
  for (const auto& f : forests) d.forests.emplace_back(f);
  d.a = a;
  d.sv = sv;
  post.draws.assign(static_cast<std::size_t>(copies), d);
  return post;
}

/// Volatility state with a single stored value h_T.
inline bavart::SvState sv_state(double c, double rho, double sigma2, double h_last) {
  bavart::SvState s = bavart::SvState::constant(1, c, rho, sigma2);
  s.h(0) = h_last;
  return s;
}

/// Tree with one split on covariate `k` at `threshold`: `low` when
/// x_k <= threshold, `high` otherwise.
inline bavart::DecisionTree step(int k, double threshold, double low, double high) {
  bavart::DecisionTree t;
  t.grow(bavart::DecisionTree::kRoot, {k, threshold}, low, high);
  return t;
}

}  // namespace fixture
