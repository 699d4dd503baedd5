#pragma once

#include "lbor/design.hpp"
#include "lbor/fit.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lbor {

// Basis of the subspace whose projection is fixed by the sampling scheme:
// the constant vector (M), nothing (P), the row-indicator space (MR) or the
// column-indicator space (MC).
Matrix scheme_fixed_space_basis(const ModelMatrices& mm, Scheme scheme);

// Asymptotic covariances of the fitted cells and their logs,
//   Cov(mu_hat) = D [P_H - P_N],  Cov(eta_hat) = [P_H - P_N] D^-1,
// where both projections are D-orthogonal, H is the model space, N the
// scheme-fixed space and D = diag(mu). Returns (mu_cov, eta_cov).
std::pair<Matrix, Matrix> cell_covariances(const ContingencyTable& mu,
                                           const ModelMatrices& mm,
                                           Scheme scheme);

// Joint asymptotic covariance of (column effects, association parameter),
// obtained by pushing Cov(eta_hat) through the linear parameter extraction.
// Only the top-left (column-effect) block depends on the scheme.
Matrix gamma_theta_cov(const ContingencyTable& mu, const ModelMatrices& mm,
                       Scheme scheme);

// Association-parameter covariance via the weighted projection onto the
// model space.
Matrix theta_cov_projection(const ContingencyTable& mu,
                            const ModelMatrices& mm);

// Gram matrix of the cross-ratio contrasts in the D^-1 inner product,
// assembled entrywise from reciprocal cells (no dense contrast product).
Matrix contrast_gram(const ContingencyTable& mu);

// Closed form inv(Zc^T inv(contrast_gram) Zc) with Zc the core interaction
// matrix.
Matrix theta_cov_explicit(const ContingencyTable& mu, const ModelMatrices& mm);

// Covariance of the counts when row totals are fixed: block structure
// diag{mu_row} - mu_row mu_row^T / rowtotal per row, as a dense I x I matrix.
Matrix row_conditional_cov(const ContingencyTable& mu);

// Representation through the row-conditional count covariance W:
// inv(Z^T W Z - Z^T W E (E^T W E)^-1 E^T W Z).
Matrix theta_cov_row_conditional(const ContingencyTable& mu,
                                 const ModelMatrices& mm);

// Factored form for bilinear designs, built from the score matrices alone
// (the core interaction matrix is never materialized).
Matrix theta_cov_factored(const ContingencyTable& mu, const DesignSpec& spec);

// Covariance of the score vector (column-effect and association components)
// when row totals are fixed. Its inverse equals gamma_theta_cov under MR.
Matrix score_information(const ContingencyTable& mu, const ModelMatrices& mm);

struct BundleOptions {
  // Maximum allowed pairwise relative deviation among the representations.
  double deviation_tol = 1e-8;
  // 1-norm condition estimate above which a warning string is recorded.
  double condition_warn = 1e12;
};

struct CovarianceBundle {
  Matrix projection;
  Matrix explicit_form;
  Matrix row_conditional;
  Matrix factored;
  Matrix score_based;
  Matrix gamma_theta;  // (K+L) x (K+L)
  Matrix eta_cov;      // I x I, scheme dependent
  Matrix mu_cov;       // I x I, scheme dependent
  SchemeSpec scheme_used_for_eta;
  double max_pairwise_deviation = 0.0;
  std::vector<std::string> warnings;
};

// Evaluates every representation at the fitted expectations and records the
// worst pairwise relative deviation (denominator max(1, |projection entry|)).
// The representations share nothing but D and the structural matrices, so
// their agreement is a genuine cross-check; disagreement beyond
// `deviation_tol` or a non-positive-definite result throws.
CovarianceBundle covariance_bundle(const FitResult& fit,
                                   const ModelMatrices& mm,
                                   const DesignSpec& spec,
                                   const SchemeSpec& scheme,
                                   const BundleOptions& opts = {});

}  // namespace lbor
