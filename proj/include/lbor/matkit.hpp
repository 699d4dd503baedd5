#pragma once

#include "lbor/common.hpp"

namespace lbor {

// Kronecker product, block form [a_ij * b].
Matrix kron(const Matrix& a, const Matrix& b);

// Column-major stacking of a matrix into a vector.
Vector vec(const Matrix& a);

// Inverse of vec for known dimensions.
Matrix unvec(const Vector& v, Index rows, Index cols);

// Rank by singular values above max(rows, cols) * eps * sigma_max.
Index numerical_rank(const Matrix& a);

// Strictly positive diagonal weights.
struct WeightVector {
  Vector d;

  explicit WeightVector(Vector values);
  Index size() const { return d.size(); }
};

// Projection onto span(basis), self-adjoint in <a,b> = a^T diag(d) b.
struct ProjectionMatrix {
  Matrix P;
  Matrix basis;
  Vector weights;

  bool idempotent(double tol = kDefaultTol) const;
  bool d_self_adjoint(double tol = kDefaultTol) const;
  Index rank() const;
};

// P = X (X^T D X)^-1 X^T D with D = diag(d). A rank-deficient basis throws
// SingularError naming the numerical rank found. An empty basis projects
// onto {0}.
ProjectionMatrix d_projection(const Matrix& basis, const Vector& d);

// Blocks of inv([[L, M], [G, H]]) via the Schur complement N = H - G L^-1 M.
// Distinct errors identify whether L or N is the singular block.
struct PartitionedInverse {
  Matrix top_left;
  Matrix top_right;
  Matrix bottom_left;
  Matrix bottom_right;

  Matrix assemble() const;
};

PartitionedInverse partitioned_inverse(const Matrix& l, const Matrix& m,
                                       const Matrix& g, const Matrix& h);

// Inverse of a symmetric positive-definite matrix via Cholesky. `label`
// names the matrix in error messages; cond1_out, when nonnull, receives the
// 1-norm condition estimate.
Matrix spd_inverse(const Matrix& a, const std::string& label,
                   double* cond1_out = nullptr);

}  // namespace lbor
