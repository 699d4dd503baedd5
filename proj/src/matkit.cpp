#include "lbor/matkit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

namespace lbor {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

Matrix unvec(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) {
    std::ostringstream msg;
    msg << "unvec: vector of length " << v.size() << " cannot fill a " << rows
        << "x" << cols << " matrix";
    throw DomainError(msg.str());
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Index numerical_rank(const Matrix& a) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& sv = svd.singularValues();
  const double cutoff = static_cast<double>(std::max(a.rows(), a.cols())) *
                        std::numeric_limits<double>::epsilon() * sv(0);
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++r;
  return r;
}

WeightVector::WeightVector(Vector values) : d(std::move(values)) {
  for (Index i = 0; i < d.size(); ++i) {
    if (!(d(i) > 0.0) || !std::isfinite(d(i))) {
      std::ostringstream msg;
      msg << "weight " << i << " = " << d(i) << " is not strictly positive";
      throw DomainError(msg.str());
    }
  }
}

bool ProjectionMatrix::idempotent(double tol) const {
  return ((P * P - P).cwiseAbs().maxCoeff()) <= tol;
}

bool ProjectionMatrix::d_self_adjoint(double tol) const {
  Matrix rhs = weights.asDiagonal() * P * weights.cwiseInverse().asDiagonal();
  return ((P.transpose() - rhs).cwiseAbs().maxCoeff()) <= tol;
}

Index ProjectionMatrix::rank() const { return numerical_rank(P); }

ProjectionMatrix d_projection(const Matrix& basis, const Vector& d) {
  if (basis.rows() != d.size()) {
    throw DomainError("d_projection: basis rows do not match weight length");
  }
  WeightVector w(d);
  ProjectionMatrix out;
  out.basis = basis;
  out.weights = d;
  if (basis.cols() == 0) {
    out.P = Matrix::Zero(d.size(), d.size());
    return out;
  }
  const Index r = numerical_rank(basis);
  if (r < basis.cols()) {
    std::ostringstream msg;
    msg << "d_projection: basis is rank deficient (numerical rank " << r
        << " of " << basis.cols() << " columns)";
    throw SingularError(msg.str());
  }
  Matrix dx = d.asDiagonal() * basis;
  Matrix gram = basis.transpose() * dx;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw SingularError("d_projection: X^T D X is not positive definite");
  }
  out.P = basis * llt.solve(dx.transpose());
  return out;
}

Matrix PartitionedInverse::assemble() const {
  const Index a = top_left.rows();
  const Index b = bottom_right.rows();
  Matrix out(a + b, a + b);
  out.topLeftCorner(a, a) = top_left;
  out.topRightCorner(a, b) = top_right;
  out.bottomLeftCorner(b, a) = bottom_left;
  out.bottomRightCorner(b, b) = bottom_right;
  return out;
}

PartitionedInverse partitioned_inverse(const Matrix& l, const Matrix& m,
                                       const Matrix& g, const Matrix& h) {
  if (l.rows() != l.cols() || h.rows() != h.cols() || m.rows() != l.rows() ||
      m.cols() != h.cols() || g.rows() != h.rows() || g.cols() != l.cols()) {
    throw DomainError("partitioned_inverse: block dimensions do not conform");
  }
  Eigen::FullPivLU<Matrix> lu_l(l);
  if (l.size() > 0 && !lu_l.isInvertible()) {
    throw SingularError("partitioned_inverse: block L is singular");
  }
  Matrix linv = l.size() > 0 ? lu_l.inverse() : Matrix(0, 0);
  Matrix n = h - g * linv * m;
  Eigen::FullPivLU<Matrix> lu_n(n);
  if (n.size() > 0 && !lu_n.isInvertible()) {
    throw SingularError(
        "partitioned_inverse: Schur complement H - G L^-1 M is singular");
  }
  Matrix ninv = n.size() > 0 ? lu_n.inverse() : Matrix(0, 0);

  PartitionedInverse out;
  out.top_left = linv + linv * m * ninv * g * linv;
  out.top_right = -linv * m * ninv;
  out.bottom_left = -ninv * g * linv;
  out.bottom_right = ninv;
  return out;
}

Matrix spd_inverse(const Matrix& a, const std::string& label,
                   double* cond1_out) {
  if (a.rows() != a.cols()) {
    throw DomainError(label + ": matrix is not square");
  }
  if (a.size() == 0) {
    if (cond1_out) *cond1_out = 1.0;
    return Matrix(0, 0);
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SingularError(label + ": matrix is not positive definite");
  }
  Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
  if (cond1_out) {
    const double na = a.cwiseAbs().colwise().sum().maxCoeff();
    const double ni = inv.cwiseAbs().colwise().sum().maxCoeff();
    *cond1_out = na * ni;
  }
  return inv;
}

}  // namespace lbor
