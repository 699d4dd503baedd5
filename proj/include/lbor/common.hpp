#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lbor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Eigen::Index;

inline constexpr double kDefaultTol = 1e-10;

// Invalid numeric input: negative count, nonpositive weight, bad dimension.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A matrix required to be invertible or full rank is not.
class SingularError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The design violates the rank conditions that make the association
// parameter estimable.
class IdentifiabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative procedure ran out of iterations.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cells of a (J+1)x(K+1) table are laid out column-major with the row index
// running fastest, matching vec() of the cell matrix. `rows` = J+1.
inline Index cell_index(Index j, Index k, Index rows) { return j + k * rows; }

}  // namespace lbor
