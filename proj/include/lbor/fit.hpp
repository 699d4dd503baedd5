#pragma once

#include "lbor/design.hpp"

#include <utility>

namespace lbor {

struct FitOptions {
  int max_iterations = 100;
  int max_halvings = 10;
  double gradient_tol = 1e-10;  // scaled by (1 + total count)
  double eta_tol = 1e-10;       // relative change of the log-expectations
};

struct FitResult {
  ContingencyTable mu_hat;   // fitted expectations, all positive
  Vector eta_hat;            // log mu_hat, in span(model_basis)
  double alpha_hat = 0.0;
  Vector rho_hat;            // J row effects (reference level dropped)
  Vector gamma_hat;          // K column effects
  Matrix theta_hat;          // L_X x L_Y association parameter
  Vector theta_vec;          // vec(theta_hat)
  bool converged = false;
  int iterations = 0;
  double max_gradient = 0.0;
};

// Maximum-likelihood fit of the log-linear association model by Newton
// iterations with step halving. The solution depends on the observed table
// only; it is shared by all four sampling schemes.
FitResult fit_loglinear(const ContingencyTable& table, const ModelMatrices& mm,
                        const FitOptions& opts = {});

// Column effects and vec(theta) read off a log-expectation vector:
// gamma = col_offset^T eta, theta = pinv(interaction_core) contrast^T eta.
std::pair<Vector, Vector> extract_parameters(const Vector& eta,
                                             const ModelMatrices& mm);

struct IpfOptions {
  int max_sweeps = 10000;
  double tol = 1e-12;  // max marginal discrepancy
};

// Joint density with the given association parameter and marginals, by
// alternating row/column rescaling of exp(interaction * vec(theta)). Scaling
// leaves every cross-product ratio untouched, so the association of the
// result is exactly `theta_prime`.
ContingencyTable ipf_constrained(const Matrix& theta_prime,
                                 const Vector& row_marg, const Vector& col_marg,
                                 const ModelMatrices& mm,
                                 const IpfOptions& opts = {});

// Expected table under a sampling scheme: n*p (M), nu*p (P), rows scaled to
// the subsample sizes (MR), columns scaled to the subsample sizes (MC).
ContingencyTable expected_table(const ContingencyTable& density,
                                const SchemeSpec& scheme);

}  // namespace lbor
