#include "lbor/bridge.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>

namespace lbor {

void LinearBridgeInput::validate() const {
  if (!(sigma_y2 > 0.0)) {
    throw DomainError("response variance must be positive");
  }
  if (cov_x.rows() != beta.size() || cov_x.cols() != beta.size()) {
    throw DomainError("covariate covariance does not match beta");
  }
  Eigen::LLT<Matrix> llt(cov_x);
  if (beta.size() > 0 && llt.info() != Eigen::Success) {
    throw DomainError("covariate covariance must be positive definite");
  }
}

Vector theta_from_beta_linear(const LinearBridgeInput& in) {
  in.validate();
  const double cond_var = in.sigma_y2 - in.beta.dot(in.cov_x * in.beta);
  if (!(cond_var > 0.0)) {
    std::ostringstream msg;
    msg << "conditional variance " << cond_var
        << " is not positive; beta is too large for sigma_y2";
    throw DomainError(msg.str());
  }
  return in.beta / cond_var;
}

double linear_bridge_f(double u, double sigma_y2) {
  return u / (sigma_y2 - u * u);
}

double linear_bridge_f_inverse(double v, double sigma_y2) {
  if (v == 0.0) return 0.0;
  // Positive root of v u^2 + u - v sigma_y2 = 0.
  return (-1.0 + std::sqrt(1.0 + 4.0 * v * v * sigma_y2)) / (2.0 * v);
}

Vector beta_from_theta_linear(const Vector& theta, double sigma_y2,
                              const Matrix& cov_x) {
  if (!(sigma_y2 > 0.0)) {
    throw DomainError("response variance must be positive");
  }
  if (cov_x.rows() != theta.size() || cov_x.cols() != theta.size()) {
    throw DomainError("covariate covariance does not match theta");
  }
  const double norm2 = theta.dot(cov_x * theta);
  if (norm2 < 0.0) {
    throw DomainError("covariate covariance must be positive semidefinite");
  }
  const double u = linear_bridge_f_inverse(std::sqrt(norm2), sigma_y2);
  return (sigma_y2 - u * u) * theta;
}

Matrix theta_from_beta_mvlinear(const Matrix& beta, const Matrix& cov_y,
                                const Matrix& cov_x) {
  if (cov_x.rows() != beta.rows() || cov_x.cols() != beta.rows() ||
      cov_y.rows() != beta.cols() || cov_y.cols() != beta.cols()) {
    throw DomainError("moment matrices do not conform with beta");
  }
  Matrix cond = cov_y - beta.transpose() * cov_x * beta;
  Eigen::LLT<Matrix> llt(cond);
  if (llt.info() != Eigen::Success) {
    throw DomainError("conditional covariance of the response is not "
                      "positive definite");
  }
  return llt.solve(beta.transpose()).transpose();
}

Vector beta_from_theta_loglinear(const Vector& theta) { return theta; }

}  // namespace lbor
