#pragma once

#include "lbor/common.hpp"

#include <string>
#include <vector>

namespace lbor {

enum class TableKind { ObservedCounts, Expected };

// A (J+1)x(K+1) table of nonnegative counts or expectations. Cell (0,0) is
// the reference cell.
struct ContingencyTable {
  Matrix cells;
  TableKind kind = TableKind::ObservedCounts;
  std::vector<std::string> row_labels;  // optional, size J+1 when present
  std::vector<std::string> col_labels;  // optional, size K+1 when present

  ContingencyTable() = default;
  explicit ContingencyTable(Matrix values,
                            TableKind table_kind = TableKind::ObservedCounts)
      : cells(std::move(values)), kind(table_kind) {}

  Index num_rows_minus_one() const { return cells.rows() - 1; }  // J
  Index num_cols_minus_one() const { return cells.cols() - 1; }  // K
  Index cell_count() const { return cells.size(); }              // I

  Vector to_vec() const;
  static ContingencyTable from_vec(const Vector& v, Index rows, Index cols,
                                   TableKind kind);

  Vector row_totals() const { return cells.rowwise().sum(); }
  Vector col_totals() const { return cells.colwise().sum().transpose(); }
  double total() const { return cells.sum(); }
  bool strictly_positive() const { return cells.minCoeff() > 0.0; }

  // J >= 1, K >= 1, entries finite and >= 0.
  void validate() const;
};

// Row scores (J x L_X) and column scores (K x L_Y) of the bilinear
// association. The reference row/column maps to the zero score implicitly.
struct DesignSpec {
  Matrix xtilde;
  Matrix ytilde;

  DesignSpec() = default;
  DesignSpec(Matrix x, Matrix y) : xtilde(std::move(x)), ytilde(std::move(y)) {}

  Index num_x_levels() const { return xtilde.rows(); }  // J
  Index num_y_levels() const { return ytilde.rows(); }  // K
  Index x_dim() const { return xtilde.cols(); }         // L_X
  Index y_dim() const { return ytilde.cols(); }         // L_Y
  Index assoc_dim() const { return x_dim() * y_dim(); } // L
};

// Structural matrices shared by the fitting and covariance code. All
// I-length axes use the cell_index() ordering.
struct ModelMatrices {
  Index J = 0;
  Index K = 0;
  Index Lx = 0;  // 0 when built from a raw interaction matrix
  Index Ly = 0;

  // I x L interaction covariates; rows for cells in row 0 or column 0 are 0.
  Matrix interaction;
  // JK x L restriction of `interaction` to cells with j,k >= 1.
  Matrix interaction_core;
  // I x JK contrasts e_jk + e_00 - e_j0 - e_0k picking out log cross-ratios.
  Matrix contrast;
  // I x K columns e_0k - e_00 picking out column main effects.
  Matrix col_offset;
  // I x K indicators of table columns k = 1..K.
  Matrix col_indicator;
  // I x (J+1) indicators of table rows j = 0..J.
  Matrix row_indicator;
  // I x (1+J+K+L) basis of the log-expectation model space: intercept,
  // row indicators j=1..J, column indicators k=1..K, interaction columns.
  Matrix model_basis;

  Index cell_count() const { return (J + 1) * (K + 1); }
  Index assoc_dim() const { return interaction.cols(); }
};

// Builds every structural matrix from the scores. Throws
// IdentifiabilityError naming the deficient factor when a score matrix does
// not have full column rank.
ModelMatrices build_model_matrices(const DesignSpec& spec);

// Escape hatch for interaction covariates that are not of Kronecker form.
// `z` is I x L with zero rows for cells in row 0 or column 0.
ModelMatrices build_model_matrices_raw(const Matrix& z, Index J, Index K);

struct IdentifiabilityReport {
  Index rank_xtilde = 0, need_xtilde = 0;
  Index rank_ytilde = 0, need_ytilde = 0;
  Index rank_interaction = 0, need_interaction = 0;
  Index rank_model_basis = 0, need_model_basis = 0;
  bool table_conforms = true;
  bool pass = false;
};

// Reports the numerical ranks of the score matrices, the interaction matrix
// and the model basis; passes iff every rank equals its column count and the
// table dimensions conform. Never throws on deficiency.
IdentifiabilityReport check_identifiability(const DesignSpec& spec,
                                            const ContingencyTable& table);

enum class Scheme { M, P, MR, MC };

const char* scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

// Sampling scheme with its size parameters: grand total (M), expected total
// (P), per-row subsample sizes (MR) or per-column subsample sizes (MC).
struct SchemeSpec {
  Scheme scheme = Scheme::M;
  double total_n = 0.0;
  double nu = 0.0;
  Vector row_sizes;
  Vector col_sizes;

  static SchemeSpec multinomial(double n);
  static SchemeSpec poisson(double expected_total);
  static SchemeSpec rows(Vector per_row_sizes);
  static SchemeSpec cols(Vector per_col_sizes);

  // Checks the parameters of the active scheme against table dimensions.
  void validate(Index J, Index K) const;
};

}  // namespace lbor
