#pragma once

// Horseshoe prior on the free contemporaneous coefficients a_jl, sampled with
// the inverse-gamma auxiliary-variable representation of the half-Cauchy
// (Makalic & Schmidt), and the Gaussian full conditional of each row a_j.

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "bavart/error.hpp"
#include "bavart/rng.hpp"

namespace bavart {

/// Local scales tau^2 (with auxiliaries nu) per equation and one global
/// lambda^2 (with auxiliary xi) shared by every equation.
struct HorseshoeState {
  std::vector<Eigen::VectorXd> tau2;
  std::vector<Eigen::VectorXd> nu;
  double lambda2 = 1.0;
  double xi = 1.0;

  /// Unit scales for an M-equation system (equation j has j free elements,
  /// counting from zero).
  static HorseshoeState initial(int m) {
    HorseshoeState s;
    for (int j = 0; j < m; ++j) {
      s.tau2.push_back(Eigen::VectorXd::Ones(j));
      s.nu.push_back(Eigen::VectorXd::Ones(j));
    }
    return s;
  }

  Eigen::VectorXd prior_variances(int j) const { return lambda2 * tau2[static_cast<std::size_t>(j)]; }
};

struct InvGammaParams {
  double shape;
  double rate;
};

/// Full conditional of tau^2 for one coefficient: IG(1, 1/nu + a^2 / (2 lambda^2)).
inline InvGammaParams horseshoe_conditional_params(double a, double lambda, double nu) {
  return {1.0, 1.0 / nu + a * a / (2.0 * lambda * lambda)};
}

/// One sweep over (tau^2, nu) for every coefficient, then (lambda^2, xi).
inline void sample_horseshoe(HorseshoeState& s, const std::vector<Eigen::VectorXd>& a, Rng& rng) {
  double sum_scaled = 0.0;
  int p = 0;
  const double lambda = std::sqrt(s.lambda2);
  for (std::size_t j = 0; j < a.size(); ++j) {
    for (Eigen::Index l = 0; l < a[j].size(); ++l) {
      auto [shape, rate] = horseshoe_conditional_params(a[j](l), lambda, s.nu[j](l));
      s.tau2[j](l) = rng.inv_gamma(shape, rate);
      s.nu[j](l) = rng.inv_gamma(1.0, 1.0 + 1.0 / s.tau2[j](l));
      sum_scaled += a[j](l) * a[j](l) / s.tau2[j](l);
      ++p;
    }
  }
  s.lambda2 = rng.inv_gamma(0.5 * (p + 1), 1.0 / s.xi + 0.5 * sum_scaled);
  s.xi = rng.inv_gamma(1.0, 1.0 + 1.0 / s.lambda2);
}

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Posterior of a_j in r = Z a_j + e, e ~ N(0, diag(w)), a_j ~ N(0, diag(d)).
inline GaussianPosterior covariance_row_posterior(const Eigen::VectorXd& r, const Eigen::MatrixXd& Z,
                                                  const Eigen::VectorXd& w, const Eigen::VectorXd& d) {
  if (Z.rows() != r.size() || w.size() != r.size() || d.size() != Z.cols())
    throw runtime_error("shrinkage.dimensions", "covariance regression dimensions disagree");
  if ((w.array() <= 0.0).any()) throw runtime_error("shrinkage.variance", "variances must be positive");
  const Eigen::VectorXd inv_w = w.cwiseInverse();
  Eigen::MatrixXd prec = Z.transpose() * inv_w.asDiagonal() * Z;
  prec.diagonal() += d.cwiseInverse();
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw runtime_error("shrinkage.singular", "posterior precision is not positive definite");
  GaussianPosterior post;
  post.mean = llt.solve(Z.transpose() * inv_w.cwiseProduct(r));
  post.cov = llt.solve(Eigen::MatrixXd::Identity(Z.cols(), Z.cols()));
  return post;
}

/// Draw a_j from its Gaussian full conditional; empty for the first equation.
inline Eigen::VectorXd sample_covariance_row(const Eigen::VectorXd& r, const Eigen::MatrixXd& Z, const Eigen::VectorXd& w,
                                             const Eigen::VectorXd& prior_var, Rng& rng) {
  if (Z.cols() == 0) return Eigen::VectorXd(0);
  const Eigen::VectorXd inv_w = w.cwiseInverse();
  Eigen::MatrixXd prec = Z.transpose() * inv_w.asDiagonal() * Z;
  prec.diagonal() += prior_var.cwiseInverse();
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw runtime_error("shrinkage.singular", "posterior precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(Z.transpose() * inv_w.cwiseProduct(r));
  Eigen::VectorXd z(Z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + llt.matrixU().solve(z);
}

}  // namespace bavart
