#pragma once

#include "lbor/common.hpp"

namespace lbor {

// Regression coefficients plus the second-order moments needed to move
// between the regression and association parametrizations.
struct LinearBridgeInput {
  Vector beta;
  double sigma_y2 = 1.0;  // marginal variance of the response
  Matrix cov_x;           // covariance of the transformed covariates

  void validate() const;
};

// theta = beta / (sigma_y2 - beta^T cov_x beta); the denominator is the
// conditional variance and must be positive.
Vector theta_from_beta_linear(const LinearBridgeInput& in);

// Inverse map: recovers beta from theta and the same second-order moments.
Vector beta_from_theta_linear(const Vector& theta, double sigma_y2,
                              const Matrix& cov_x);

// f(u) = u / (sigma_y2 - u^2) on [0, sigma_y) and its inverse, the norms'
// one-dimensional link. Exposed for direct checking.
double linear_bridge_f(double u, double sigma_y2);
double linear_bridge_f_inverse(double v, double sigma_y2);

// Multivariate response: theta = beta inv(cov_y - beta^T cov_x beta).
Matrix theta_from_beta_mvlinear(const Matrix& beta, const Matrix& cov_y,
                                const Matrix& cov_x);

// Log-linear response: the two parametrizations coincide.
Vector beta_from_theta_loglinear(const Vector& theta);

}  // namespace lbor
