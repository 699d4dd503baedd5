#include "lbor/fit.hpp"

#include "lbor/matkit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <sstream>

namespace lbor {

namespace {

double poisson_loglik(const Vector& r, const Vector& eta) {
  double s = 0.0;
  for (Index i = 0; i < r.size(); ++i) {
    const double mu = std::exp(eta(i));
    if (!std::isfinite(mu)) return -std::numeric_limits<double>::infinity();
    s += r(i) * eta(i) - mu;
  }
  return s;
}

void check_conformance(const ContingencyTable& table, const ModelMatrices& mm,
                       const char* what) {
  if (table.cells.rows() != mm.J + 1 || table.cells.cols() != mm.K + 1) {
    std::ostringstream msg;
    msg << what << ": table is " << table.cells.rows() << "x"
        << table.cells.cols() << " but the design describes a " << mm.J + 1
        << "x" << mm.K + 1 << " table";
    throw DomainError(msg.str());
  }
}

}  // namespace

FitResult fit_loglinear(const ContingencyTable& table, const ModelMatrices& mm,
                        const FitOptions& opts) {
  table.validate();
  check_conformance(table, mm, "fit_loglinear");
  {
    const Vector rt = table.row_totals();
    const Vector ct = table.col_totals();
    for (Index j = 0; j < rt.size(); ++j)
      if (!(rt(j) > 0.0))
        throw DomainError("fit_loglinear: row " + std::to_string(j) +
                          " has zero total");
    for (Index k = 0; k < ct.size(); ++k)
      if (!(ct(k) > 0.0))
        throw DomainError("fit_loglinear: column " + std::to_string(k) +
                          " has zero total");
  }

  const Matrix& h = mm.model_basis;
  const Vector r = table.to_vec();
  const double n = r.sum();

  // Flatten zero cells for the start only; the solution is unaffected.
  Vector target = (r.array() + 0.5).log();
  Vector coef = h.colPivHouseholderQr().solve(target);
  Vector eta = h * coef;
  double ll = poisson_loglik(r, eta);

  bool converged = false;
  int iter = 0;
  double max_grad = std::numeric_limits<double>::infinity();
  const double grad_cut = opts.gradient_tol * (1.0 + n);

  for (iter = 1; iter <= opts.max_iterations; ++iter) {
    Vector mu = eta.array().exp();
    Vector grad = h.transpose() * (r - mu);
    Matrix info = h.transpose() * mu.asDiagonal() * h;
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
      throw SingularError("fit_loglinear: observed information is singular");
    }
    Vector step = ldlt.solve(grad);

    double t = 1.0;
    Vector coef_new;
    Vector eta_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half <= opts.max_halvings; ++half) {
      coef_new = coef + t * step;
      eta_new = h * coef_new;
      ll_new = poisson_loglik(r, eta_new);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll)))
        break;
      t *= 0.5;
    }

    const double rel_change =
        (eta_new - eta).lpNorm<Eigen::Infinity>() /
        (1.0 + eta.lpNorm<Eigen::Infinity>());
    coef = coef_new;
    eta = eta_new;
    ll = ll_new;

    mu = eta.array().exp();
    grad = h.transpose() * (r - mu);
    max_grad = grad.lpNorm<Eigen::Infinity>();
    if (max_grad <= grad_cut && rel_change <= opts.eta_tol) {
      converged = true;
      break;
    }
  }

  if (!converged) {
    const Vector mu = eta.array().exp();
    std::ostringstream msg;
    msg << "fit_loglinear: no convergence after " << opts.max_iterations
        << " iterations (max score " << max_grad << ", smallest fitted cell "
        << mu.minCoeff() << "); the estimate may not exist for this table";
    throw ConvergenceError(msg.str());
  }

  // A vanishing fitted cell means the likelihood peaks on the boundary and
  // the estimate does not exist; the score goes quiet there as well, so the
  // cell size is the reliable signal.
  {
    const double smallest = eta.array().exp().minCoeff();
    if (smallest <= grad_cut) {
      std::ostringstream msg;
      msg << "fit_loglinear: estimate lies on the boundary (smallest fitted "
             "cell "
          << smallest << "); the estimate does not exist for this table";
      throw ConvergenceError(msg.str());
    }
  }

  FitResult out;
  out.eta_hat = eta;
  out.mu_hat = ContingencyTable::from_vec(eta.array().exp(), mm.J + 1,
                                          mm.K + 1, TableKind::Expected);
  out.mu_hat.row_labels = table.row_labels;
  out.mu_hat.col_labels = table.col_labels;

  const Index rows = mm.J + 1;
  out.alpha_hat = eta(cell_index(0, 0, rows));
  out.rho_hat.resize(mm.J);
  for (Index j = 1; j <= mm.J; ++j)
    out.rho_hat(j - 1) = eta(cell_index(j, 0, rows)) - out.alpha_hat;

  auto [gamma, theta] = extract_parameters(eta, mm);
  out.gamma_hat = gamma;
  out.theta_vec = theta;
  if (mm.Lx > 0 || mm.Ly > 0) {
    out.theta_hat = unvec(theta, mm.Lx, mm.Ly);
  } else {
    out.theta_hat = unvec(theta, theta.size(), theta.size() > 0 ? 1 : 0);
  }
  out.converged = true;
  out.iterations = iter;
  out.max_gradient = max_grad;
  return out;
}

std::pair<Vector, Vector> extract_parameters(const Vector& eta,
                                             const ModelMatrices& mm) {
  if (eta.size() != mm.cell_count()) {
    throw DomainError("extract_parameters: log-expectation length does not "
                      "match the cell count");
  }
  Vector gamma = mm.col_offset.transpose() * eta;
  const Matrix& zc = mm.interaction_core;
  Vector theta;
  if (zc.cols() == 0) {
    theta.resize(0);
  } else {
    Matrix gram = zc.transpose() * zc;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw SingularError(
          "extract_parameters: interaction Gram matrix is singular");
    }
    theta = llt.solve(zc.transpose() * (mm.contrast.transpose() * eta));
  }
  return {std::move(gamma), std::move(theta)};
}

ContingencyTable ipf_constrained(const Matrix& theta_prime,
                                 const Vector& row_marg, const Vector& col_marg,
                                 const ModelMatrices& mm,
                                 const IpfOptions& opts) {
  const Index rows = mm.J + 1;
  const Index cols = mm.K + 1;
  if (mm.Lx > 0 || mm.Ly > 0) {
    if (theta_prime.rows() != mm.Lx || theta_prime.cols() != mm.Ly)
      throw DomainError("ipf_constrained: association parameter has the "
                        "wrong shape for this design");
  } else if (theta_prime.size() != mm.assoc_dim()) {
    throw DomainError("ipf_constrained: association parameter has the wrong "
                      "length for this design");
  }
  if (row_marg.size() != rows || col_marg.size() != cols) {
    throw DomainError("ipf_constrained: marginal lengths do not match the "
                      "table dimensions");
  }
  if (!(row_marg.minCoeff() > 0.0) || !(col_marg.minCoeff() > 0.0)) {
    throw DomainError("ipf_constrained: marginals must be strictly positive");
  }
  if (std::abs(row_marg.sum() - 1.0) > 1e-8 ||
      std::abs(col_marg.sum() - 1.0) > 1e-8) {
    throw DomainError("ipf_constrained: marginals must each sum to 1");
  }

  Vector psi = mm.interaction * vec(theta_prime);
  Matrix p = unvec(psi.array().exp().matrix(), rows, cols);
  p /= p.sum();

  double prev_disc = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    Vector rt = p.rowwise().sum();
    p.array().colwise() *= (row_marg.array() / rt.array());
    Vector ct = p.colwise().sum().transpose();
    p.array().rowwise() *= (col_marg.array() / ct.array()).transpose();

    const double row_disc =
        (p.rowwise().sum() - row_marg).cwiseAbs().maxCoeff();
    const double col_disc =
        (p.colwise().sum().transpose() - col_marg).cwiseAbs().maxCoeff();
    const double disc = std::max(row_disc, col_disc);
    // Contraction check; a genuine increase means something is badly wrong.
    if (disc > prev_disc + 1e-12) {
      std::ostringstream msg;
      msg << "ipf_constrained: marginal discrepancy increased from "
          << prev_disc << " to " << disc << " at sweep " << sweep;
      throw ConvergenceError(msg.str());
    }
    prev_disc = disc;
    if (disc <= opts.tol) {
      return ContingencyTable(std::move(p), TableKind::Expected);
    }
  }
  std::ostringstream msg;
  msg << "ipf_constrained: no convergence after " << opts.max_sweeps
      << " sweeps; final marginal discrepancy " << prev_disc;
  throw ConvergenceError(msg.str());
}

ContingencyTable expected_table(const ContingencyTable& density,
                                const SchemeSpec& scheme) {
  density.validate();
  if (!density.strictly_positive()) {
    throw DomainError("expected_table: density must be strictly positive");
  }
  if (std::abs(density.total() - 1.0) > 1e-8) {
    throw DomainError("expected_table: density must sum to 1");
  }
  const Index J = density.num_rows_minus_one();
  const Index K = density.num_cols_minus_one();
  scheme.validate(J, K);

  ContingencyTable mu;
  mu.kind = TableKind::Expected;
  mu.row_labels = density.row_labels;
  mu.col_labels = density.col_labels;
  switch (scheme.scheme) {
    case Scheme::M:
      mu.cells = scheme.total_n * density.cells;
      break;
    case Scheme::P:
      mu.cells = scheme.nu * density.cells;
      break;
    case Scheme::MR: {
      const Vector rt = density.row_totals();
      for (Index j = 0; j <= J; ++j)
        if (!(rt(j) > 0.0))
          throw DomainError("expected_table: zero row marginal under MR");
      mu.cells = density.cells.array().colwise() *
                 (scheme.row_sizes.array() / rt.array());
      break;
    }
    case Scheme::MC: {
      const Vector ct = density.col_totals();
      for (Index k = 0; k <= K; ++k)
        if (!(ct(k) > 0.0))
          throw DomainError("expected_table: zero column marginal under MC");
      mu.cells = density.cells.array().rowwise() *
                 (scheme.col_sizes.array() / ct.array()).transpose();
      break;
    }
  }
  return mu;
}

}  // namespace lbor
