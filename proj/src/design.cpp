#include "lbor/design.hpp"

#include "lbor/matkit.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace lbor {

Vector ContingencyTable::to_vec() const { return vec(cells); }

ContingencyTable ContingencyTable::from_vec(const Vector& v, Index rows,
                                            Index cols, TableKind kind) {
  return ContingencyTable(unvec(v, rows, cols), kind);
}

void ContingencyTable::validate() const {
  if (cells.rows() < 2 || cells.cols() < 2) {
    throw DomainError("table must have at least two rows and two columns");
  }
  for (Index k = 0; k < cells.cols(); ++k) {
    for (Index j = 0; j < cells.rows(); ++j) {
      const double v = cells(j, k);
      if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream msg;
        msg << "cell (" << j << "," << k << ") = " << v
            << " must be finite and nonnegative";
        throw DomainError(msg.str());
      }
    }
  }
}

namespace {

// Score matrices with the zero reference row prepended.
Matrix with_reference_row(const Matrix& scores) {
  Matrix full(scores.rows() + 1, scores.cols());
  full.row(0).setZero();
  full.bottomRows(scores.rows()) = scores;
  return full;
}

ModelMatrices assemble(Matrix z, Index J, Index K, Index Lx, Index Ly) {
  const Index rows = J + 1;
  const Index I = rows * (K + 1);
  const Index L = z.cols();

  ModelMatrices mm;
  mm.J = J;
  mm.K = K;
  mm.Lx = Lx;
  mm.Ly = Ly;
  mm.interaction = std::move(z);

  mm.interaction_core.resize(J * K, L);
  for (Index k = 1; k <= K; ++k)
    for (Index j = 1; j <= J; ++j)
      mm.interaction_core.row((k - 1) * J + (j - 1)) =
          mm.interaction.row(cell_index(j, k, rows));

  mm.contrast = Matrix::Zero(I, J * K);
  for (Index k = 1; k <= K; ++k) {
    for (Index j = 1; j <= J; ++j) {
      const Index col = (k - 1) * J + (j - 1);
      mm.contrast(cell_index(j, k, rows), col) += 1.0;
      mm.contrast(cell_index(0, 0, rows), col) += 1.0;
      mm.contrast(cell_index(j, 0, rows), col) -= 1.0;
      mm.contrast(cell_index(0, k, rows), col) -= 1.0;
    }
  }

  mm.col_offset = Matrix::Zero(I, K);
  for (Index k = 1; k <= K; ++k) {
    mm.col_offset(cell_index(0, k, rows), k - 1) = 1.0;
    mm.col_offset(cell_index(0, 0, rows), k - 1) = -1.0;
  }

  mm.col_indicator = Matrix::Zero(I, K);
  for (Index k = 1; k <= K; ++k)
    for (Index j = 0; j <= J; ++j)
      mm.col_indicator(cell_index(j, k, rows), k - 1) = 1.0;

  mm.row_indicator = Matrix::Zero(I, J + 1);
  for (Index j = 0; j <= J; ++j)
    for (Index k = 0; k <= K; ++k)
      mm.row_indicator(cell_index(j, k, rows), j) = 1.0;

  mm.model_basis.resize(I, 1 + J + K + L);
  mm.model_basis.col(0).setOnes();
  mm.model_basis.middleCols(1, J) = mm.row_indicator.rightCols(J);
  mm.model_basis.middleCols(1 + J, K) = mm.col_indicator;
  mm.model_basis.rightCols(L) = mm.interaction;
  return mm;
}

}  // namespace

ModelMatrices build_model_matrices(const DesignSpec& spec) {
  const Index J = spec.num_x_levels();
  const Index K = spec.num_y_levels();
  if (J < 1 || K < 1) {
    throw DomainError("design must cover at least one non-reference level "
                      "per factor");
  }
  if (!spec.xtilde.allFinite() || !spec.ytilde.allFinite()) {
    throw DomainError("design scores must be finite");
  }
  if (numerical_rank(spec.xtilde) < spec.x_dim()) {
    std::ostringstream msg;
    msg << "row scores are rank deficient (numerical rank "
        << numerical_rank(spec.xtilde) << " of " << spec.x_dim()
        << " columns)";
    throw IdentifiabilityError(msg.str());
  }
  if (numerical_rank(spec.ytilde) < spec.y_dim()) {
    std::ostringstream msg;
    msg << "column scores are rank deficient (numerical rank "
        << numerical_rank(spec.ytilde) << " of " << spec.y_dim()
        << " columns)";
    throw IdentifiabilityError(msg.str());
  }
  Matrix z = kron(with_reference_row(spec.ytilde),
                  with_reference_row(spec.xtilde));
  ModelMatrices mm =
      assemble(std::move(z), J, K, spec.x_dim(), spec.y_dim());
  if (numerical_rank(mm.model_basis) < mm.model_basis.cols()) {
    throw IdentifiabilityError("model basis is rank deficient");
  }
  return mm;
}

ModelMatrices build_model_matrices_raw(const Matrix& z, Index J, Index K) {
  if (J < 1 || K < 1) {
    throw DomainError("table must have at least two rows and two columns");
  }
  const Index rows = J + 1;
  if (z.rows() != rows * (K + 1)) {
    throw DomainError("interaction matrix rows do not match the cell count");
  }
  for (Index j = 0; j <= J; ++j) {
    if (z.row(cell_index(j, 0, rows)).cwiseAbs().maxCoeff() > 0.0) {
      throw DomainError("interaction covariates must vanish in column 0");
    }
  }
  for (Index k = 0; k <= K; ++k) {
    if (z.row(cell_index(0, k, rows)).cwiseAbs().maxCoeff() > 0.0) {
      throw DomainError("interaction covariates must vanish in row 0");
    }
  }
  if (numerical_rank(z) < z.cols()) {
    std::ostringstream msg;
    msg << "interaction matrix is rank deficient (numerical rank "
        << numerical_rank(z) << " of " << z.cols() << " columns)";
    throw IdentifiabilityError(msg.str());
  }
  ModelMatrices mm = assemble(z, J, K, 0, 0);
  if (numerical_rank(mm.model_basis) < mm.model_basis.cols()) {
    throw IdentifiabilityError("model basis is rank deficient");
  }
  return mm;
}

IdentifiabilityReport check_identifiability(const DesignSpec& spec,
                                            const ContingencyTable& table) {
  IdentifiabilityReport rep;
  rep.need_xtilde = spec.x_dim();
  rep.need_ytilde = spec.y_dim();
  rep.rank_xtilde = numerical_rank(spec.xtilde);
  rep.rank_ytilde = numerical_rank(spec.ytilde);

  const Index J = spec.num_x_levels();
  const Index K = spec.num_y_levels();
  rep.table_conforms = table.cells.rows() == J + 1 && table.cells.cols() == K + 1;

  Matrix z = kron(with_reference_row(spec.ytilde),
                  with_reference_row(spec.xtilde));
  rep.need_interaction = z.cols();
  rep.rank_interaction = numerical_rank(z);

  ModelMatrices mm = assemble(std::move(z), J, K, spec.x_dim(), spec.y_dim());
  rep.need_model_basis = mm.model_basis.cols();
  rep.rank_model_basis = numerical_rank(mm.model_basis);

  rep.pass = rep.table_conforms && rep.rank_xtilde == rep.need_xtilde &&
             rep.rank_ytilde == rep.need_ytilde &&
             rep.rank_interaction == rep.need_interaction &&
             rep.rank_model_basis == rep.need_model_basis;
  return rep;
}

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::M: return "M";
    case Scheme::P: return "P";
    case Scheme::MR: return "MR";
    case Scheme::MC: return "MC";
  }
  return "?";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "M") return Scheme::M;
  if (name == "P") return Scheme::P;
  if (name == "MR") return Scheme::MR;
  if (name == "MC") return Scheme::MC;
  throw DomainError("unknown sampling scheme '" + name +
                    "' (expected M, P, MR or MC)");
}

SchemeSpec SchemeSpec::multinomial(double n) {
  SchemeSpec s;
  s.scheme = Scheme::M;
  s.total_n = n;
  return s;
}

SchemeSpec SchemeSpec::poisson(double expected_total) {
  SchemeSpec s;
  s.scheme = Scheme::P;
  s.nu = expected_total;
  return s;
}

SchemeSpec SchemeSpec::rows(Vector per_row_sizes) {
  SchemeSpec s;
  s.scheme = Scheme::MR;
  s.row_sizes = std::move(per_row_sizes);
  return s;
}

SchemeSpec SchemeSpec::cols(Vector per_col_sizes) {
  SchemeSpec s;
  s.scheme = Scheme::MC;
  s.col_sizes = std::move(per_col_sizes);
  return s;
}

void SchemeSpec::validate(Index J, Index K) const {
  switch (scheme) {
    case Scheme::M:
      if (!(total_n > 0.0) || !std::isfinite(total_n))
        throw DomainError("scheme M requires a positive total sample size");
      break;
    case Scheme::P:
      if (!(nu > 0.0) || !std::isfinite(nu))
        throw DomainError("scheme P requires a positive expected total");
      break;
    case Scheme::MR:
      if (row_sizes.size() != J + 1)
        throw DomainError("scheme MR requires one subsample size per row");
      if (!row_sizes.allFinite() || row_sizes.minCoeff() < 0.0)
        throw DomainError("scheme MR subsample sizes must be nonnegative");
      break;
    case Scheme::MC:
      if (col_sizes.size() != K + 1)
        throw DomainError("scheme MC requires one subsample size per column");
      if (!col_sizes.allFinite() || col_sizes.minCoeff() < 0.0)
        throw DomainError("scheme MC subsample sizes must be nonnegative");
      break;
  }
}

}  // namespace lbor
