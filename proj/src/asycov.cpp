#include "lbor/asycov.hpp"

#include "lbor/matkit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace lbor {

namespace {

Vector positive_mu_vec(const ContingencyTable& mu, const char* what) {
  mu.validate();
  const Vector v = mu.to_vec();
  for (Index i = 0; i < v.size(); ++i) {
    if (!(v(i) > 0.0)) {
      std::ostringstream msg;
      msg << what << ": expected cell " << i << " = " << v(i)
          << " must be strictly positive";
      throw DomainError(msg.str());
    }
  }
  return v;
}

void check_dims(const ContingencyTable& mu, Index J, Index K,
                const char* what) {
  if (mu.cells.rows() != J + 1 || mu.cells.cols() != K + 1) {
    throw DomainError(std::string(what) +
                      ": table dimensions do not match the design");
  }
}

// Left inverse (Zc^T Zc)^-1 Zc^T of the core interaction matrix.
Matrix core_left_inverse(const ModelMatrices& mm) {
  const Matrix& zc = mm.interaction_core;
  Matrix gram = zc.transpose() * zc;
  return spd_inverse(gram, "interaction Gram matrix") * zc.transpose();
}

}  // namespace

Matrix scheme_fixed_space_basis(const ModelMatrices& mm, Scheme scheme) {
  const Index cells = mm.cell_count();
  switch (scheme) {
    case Scheme::M:
      return Matrix::Ones(cells, 1);
    case Scheme::P:
      return Matrix(cells, 0);
    case Scheme::MR:
      return mm.row_indicator;
    case Scheme::MC: {
      Matrix basis(cells, mm.K + 1);
      basis.col(0).setOnes();
      basis.rightCols(mm.K) = mm.col_indicator;
      return basis;
    }
  }
  return Matrix(cells, 0);
}

std::pair<Matrix, Matrix> cell_covariances(const ContingencyTable& mu,
                                           const ModelMatrices& mm,
                                           Scheme scheme) {
  check_dims(mu, mm.J, mm.K, "cell_covariances");
  const Vector d = positive_mu_vec(mu, "cell_covariances");
  const Matrix ph = d_projection(mm.model_basis, d).P;
  const Matrix nbasis = scheme_fixed_space_basis(mm, scheme);
  const Matrix pn = nbasis.cols() == 0
                        ? Matrix::Zero(d.size(), d.size())
                        : d_projection(nbasis, d).P;
  Matrix diff = ph - pn;
  Matrix mu_cov = d.asDiagonal() * diff;
  Matrix eta_cov = diff * d.cwiseInverse().asDiagonal();
  return {std::move(mu_cov), std::move(eta_cov)};
}

Matrix gamma_theta_cov(const ContingencyTable& mu, const ModelMatrices& mm,
                       Scheme scheme) {
  const Matrix eta_cov = cell_covariances(mu, mm, scheme).second;
  const Matrix zminus = core_left_inverse(mm);
  const Index Kdim = mm.K;
  const Index L = mm.assoc_dim();
  Matrix t(Kdim + L, mu.cell_count());
  t.topRows(Kdim) = mm.col_offset.transpose();
  t.bottomRows(L) = zminus * mm.contrast.transpose();
  return t * eta_cov * t.transpose();
}

Matrix theta_cov_projection(const ContingencyTable& mu,
                            const ModelMatrices& mm) {
  check_dims(mu, mm.J, mm.K, "theta_cov_projection");
  const Vector d = positive_mu_vec(mu, "theta_cov_projection");
  const Matrix ph = d_projection(mm.model_basis, d).P;
  const Matrix zminus = core_left_inverse(mm);
  Matrix middle =
      mm.contrast.transpose() * ph * d.cwiseInverse().asDiagonal() * mm.contrast;
  return zminus * middle * zminus.transpose();
}

Matrix contrast_gram(const ContingencyTable& mu) {
  positive_mu_vec(mu, "contrast_gram");
  const Index J = mu.num_rows_minus_one();
  const Index K = mu.num_cols_minus_one();
  const double inv00 = 1.0 / mu.cells(0, 0);

  Matrix out(J * K, J * K);
  for (Index k = 1; k <= K; ++k) {
    for (Index j = 1; j <= J; ++j) {
      const Index a = (k - 1) * J + (j - 1);
      for (Index m = 1; m <= K; ++m) {
        for (Index l = 1; l <= J; ++l) {
          const Index b = (m - 1) * J + (l - 1);
          double v = inv00;
          if (j == l) v += 1.0 / mu.cells(j, 0);
          if (k == m) v += 1.0 / mu.cells(0, k);
          if (j == l && k == m) v += 1.0 / mu.cells(j, k);
          out(a, b) = v;
        }
      }
    }
  }
  return out;
}

Matrix theta_cov_explicit(const ContingencyTable& mu,
                          const ModelMatrices& mm) {
  check_dims(mu, mm.J, mm.K, "theta_cov_explicit");
  Matrix gram = contrast_gram(mu);
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw SingularError("contrast Gram matrix: matrix is not positive definite");
  }
  const Matrix& zc = mm.interaction_core;
  Matrix inner = zc.transpose() * llt.solve(zc);
  return spd_inverse(inner, "theta precision (explicit form)");
}

Matrix row_conditional_cov(const ContingencyTable& mu) {
  positive_mu_vec(mu, "row_conditional_cov");
  const Index J = mu.num_rows_minus_one();
  const Index K = mu.num_cols_minus_one();
  const Index rows = J + 1;
  Matrix w = Matrix::Zero(mu.cell_count(), mu.cell_count());
  for (Index j = 0; j <= J; ++j) {
    const double rowtot = mu.cells.row(j).sum();
    for (Index k = 0; k <= K; ++k) {
      const Index a = cell_index(j, k, rows);
      for (Index m = 0; m <= K; ++m) {
        const Index b = cell_index(j, m, rows);
        double v = -mu.cells(j, k) * mu.cells(j, m) / rowtot;
        if (k == m) v += mu.cells(j, k);
        w(a, b) = v;
      }
    }
  }
  return w;
}

Matrix theta_cov_row_conditional(const ContingencyTable& mu,
                                 const ModelMatrices& mm) {
  check_dims(mu, mm.J, mm.K, "theta_cov_row_conditional");
  const Matrix w = row_conditional_cov(mu);
  const Matrix& z = mm.interaction;
  const Matrix& e = mm.col_indicator;
  Matrix ewe = e.transpose() * w * e;
  Matrix ewe_inv;
  try {
    ewe_inv = spd_inverse(ewe, "column-indicator quadratic form");
  } catch (const SingularError&) {
    throw SingularError("theta_cov_row_conditional: degenerate column "
                        "structure (E^T W E is singular)");
  }
  Matrix zwe = z.transpose() * w * e;
  Matrix inner = z.transpose() * w * z - zwe * ewe_inv * zwe.transpose();
  return spd_inverse(inner, "theta precision (row-conditional form)");
}

Matrix theta_cov_factored(const ContingencyTable& mu, const DesignSpec& spec) {
  const Index J = spec.num_x_levels();
  const Index K = spec.num_y_levels();
  check_dims(mu, J, K, "theta_cov_factored");
  const Vector d = positive_mu_vec(mu, "theta_cov_factored");
  const Index rows = J + 1;

  // Dense contrast Gram in the D^-1 inner product, from scratch.
  Matrix c = Matrix::Zero(mu.cell_count(), J * K);
  for (Index k = 1; k <= K; ++k) {
    for (Index j = 1; j <= J; ++j) {
      const Index col = (k - 1) * J + (j - 1);
      c(cell_index(j, k, rows), col) += 1.0;
      c(cell_index(0, 0, rows), col) += 1.0;
      c(cell_index(j, 0, rows), col) -= 1.0;
      c(cell_index(0, k, rows), col) -= 1.0;
    }
  }
  Matrix gram = c.transpose() * d.cwiseInverse().asDiagonal() * c;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw SingularError("contrast Gram matrix: matrix is not positive definite");
  }
  Matrix zk = kron(spec.ytilde, spec.xtilde);
  Matrix inner = zk.transpose() * llt.solve(zk);
  return spd_inverse(inner, "theta precision (factored form)");
}

Matrix score_information(const ContingencyTable& mu, const ModelMatrices& mm) {
  check_dims(mu, mm.J, mm.K, "score_information");
  const Matrix w = row_conditional_cov(mu);
  const Matrix& z = mm.interaction;
  const Matrix& e = mm.col_indicator;
  const Index Kdim = mm.K;
  const Index L = mm.assoc_dim();
  Matrix out(Kdim + L, Kdim + L);
  out.topLeftCorner(Kdim, Kdim) = e.transpose() * w * e;
  out.topRightCorner(Kdim, L) = e.transpose() * w * z;
  out.bottomLeftCorner(L, Kdim) = z.transpose() * w * e;
  out.bottomRightCorner(L, L) = z.transpose() * w * z;
  return out;
}

namespace {

void require_spd(const Matrix& m, const char* route,
                 std::vector<std::string>* warnings, double cond_warn) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw SingularError(std::string("covariance_bundle: ") + route +
                        " representation is not positive definite");
  }
  const double cond =
      es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  if (warnings && cond > cond_warn) {
    std::ostringstream msg;
    msg << route << " representation has condition estimate " << cond;
    warnings->push_back(msg.str());
  }
}

double pairwise_deviation(const Matrix& reference, const Matrix& other) {
  double worst = 0.0;
  for (Index j = 0; j < reference.cols(); ++j) {
    for (Index i = 0; i < reference.rows(); ++i) {
      const double denom = std::max(1.0, std::abs(reference(i, j)));
      worst = std::max(worst, std::abs(reference(i, j) - other(i, j)) / denom);
    }
  }
  return worst;
}

}  // namespace

CovarianceBundle covariance_bundle(const FitResult& fit,
                                   const ModelMatrices& mm,
                                   const DesignSpec& spec,
                                   const SchemeSpec& scheme,
                                   const BundleOptions& opts) {
  if (!fit.converged) {
    throw DomainError("covariance_bundle: fit did not converge");
  }
  const ContingencyTable& mu = fit.mu_hat;
  scheme.validate(mm.J, mm.K);

  CovarianceBundle bundle;
  auto run = [](const char* route, auto&& f) {
    try {
      return f();
    } catch (const DomainError& err) {
      throw DomainError(std::string(route) + " route: " + err.what());
    } catch (const SingularError& err) {
      throw SingularError(std::string(route) + " route: " + err.what());
    }
  };

  bundle.projection =
      run("projection", [&] { return theta_cov_projection(mu, mm); });
  bundle.explicit_form =
      run("explicit", [&] { return theta_cov_explicit(mu, mm); });
  bundle.row_conditional = run(
      "row-conditional", [&] { return theta_cov_row_conditional(mu, mm); });
  bundle.factored =
      run("factored", [&] { return theta_cov_factored(mu, spec); });
  bundle.score_based = run("score", [&] {
    const Matrix info = score_information(mu, mm);
    const Index Kdim = mm.K;
    const Index L = mm.assoc_dim();
    PartitionedInverse blocks = partitioned_inverse(
        info.topLeftCorner(Kdim, Kdim), info.topRightCorner(Kdim, L),
        info.bottomLeftCorner(L, Kdim), info.bottomRightCorner(L, L));
    return blocks.bottom_right;
  });

  bundle.gamma_theta = gamma_theta_cov(mu, mm, scheme.scheme);
  auto [mu_cov, eta_cov] = cell_covariances(mu, mm, scheme.scheme);
  bundle.mu_cov = std::move(mu_cov);
  bundle.eta_cov = std::move(eta_cov);
  bundle.scheme_used_for_eta = scheme;

  const Matrix* routes[] = {&bundle.explicit_form, &bundle.row_conditional,
                            &bundle.factored, &bundle.score_based};
  double dev = 0.0;
  for (const Matrix* m : routes) {
    dev = std::max(dev, pairwise_deviation(bundle.projection, *m));
  }
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      dev = std::max(dev, pairwise_deviation(*routes[a], *routes[b]));
    }
  }
  bundle.max_pairwise_deviation = dev;

  require_spd(bundle.projection, "projection", &bundle.warnings,
              opts.condition_warn);
  require_spd(bundle.explicit_form, "explicit", nullptr, opts.condition_warn);
  require_spd(bundle.row_conditional, "row-conditional", nullptr,
              opts.condition_warn);
  require_spd(bundle.factored, "factored", nullptr, opts.condition_warn);
  require_spd(bundle.score_based, "score", nullptr, opts.condition_warn);

  if (dev > opts.deviation_tol) {
    std::ostringstream msg;
    msg << "covariance_bundle: representations disagree (max pairwise "
           "relative deviation "
        << dev << " exceeds " << opts.deviation_tol << ")";
    throw SingularError(msg.str());
  }
  return bundle;
}

}  // namespace lbor
