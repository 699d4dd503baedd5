#include "lbor/bridge.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace lbor;

namespace {
double max_abs(const Matrix& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}
}  // namespace

TEST_CASE("linear bridge: worked value and sign preservation") {
  LinearBridgeInput in;
  in.beta = (Vector(1) << 0.5).finished();
  in.sigma_y2 = 1.0;
  in.cov_x = Matrix::Identity(1, 1);
  Vector theta = theta_from_beta_linear(in);
  CHECK(theta(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  LinearBridgeInput zero = in;
  zero.beta.setZero();
  CHECK(max_abs(theta_from_beta_linear(zero)) == 0.0);

  auto rng = tests::make_rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    LinearBridgeInput rnd;
    rnd.cov_x = tests::random_spd(rng, 3);
    rnd.sigma_y2 = tests::uniform(rng, 0.5, 3.0);
    // stay inside the feasible ball
    Vector dir = tests::random_matrix(rng, 3, 1).col(0);
    const double norm = std::sqrt(dir.dot(rnd.cov_x * dir));
    rnd.beta = dir * tests::uniform(rng, 0.05, 0.9) *
               std::sqrt(rnd.sigma_y2) / norm;
    Vector t = theta_from_beta_linear(rnd);
    for (Index i = 0; i < 3; ++i) {
      CHECK(std::signbit(t(i)) == std::signbit(rnd.beta(i)));
    }
  }
}

TEST_CASE("linear bridge: domain guard") {
  LinearBridgeInput in;
  in.beta = (Vector(1) << 1.5).finished();
  in.sigma_y2 = 1.0;
  in.cov_x = Matrix::Identity(1, 1);
  CHECK_THROWS_AS(theta_from_beta_linear(in), DomainError);
  in.beta = (Vector(1) << 0.5).finished();
  in.sigma_y2 = -1.0;
  CHECK_THROWS_AS(theta_from_beta_linear(in), DomainError);
}

TEST_CASE("linear bridge: inverse map and round trips") {
  Vector theta = beta_from_theta_linear((Vector(1) << 2.0 / 3.0).finished(),
                                        1.0, Matrix::Identity(1, 1));
  CHECK(theta(0) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(max_abs(beta_from_theta_linear(Vector::Zero(2), 1.0,
                                       Matrix::Identity(2, 2))) == 0.0);

  for (double sy : {0.7, 1.0, 2.5}) {
    for (double v : {0.1, 1.0, 10.0}) {
      const double u = linear_bridge_f_inverse(v, sy);
      CHECK(std::abs(linear_bridge_f(u, sy) - v) < 1e-12);
      CHECK(u >= 0.0);
      CHECK(u < std::sqrt(sy));
    }
  }

  auto rng = tests::make_rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Index dim = 1 + trial % 3;
    LinearBridgeInput in;
    in.cov_x = tests::random_spd(rng, dim);
    in.sigma_y2 = tests::uniform(rng, 0.5, 4.0);
    Vector dir = tests::random_matrix(rng, dim, 1).col(0);
    const double norm = std::sqrt(dir.dot(in.cov_x * dir));
    in.beta = dir * tests::uniform(rng, 0.01, 0.95) *
              std::sqrt(in.sigma_y2) / norm;

    Vector theta_rt = theta_from_beta_linear(in);
    Vector beta_rt = beta_from_theta_linear(theta_rt, in.sigma_y2, in.cov_x);
    CHECK(max_abs(beta_rt - in.beta) < 1e-10);
    Vector theta_again = theta_from_beta_linear(
        {beta_rt, in.sigma_y2, in.cov_x});
    CHECK(max_abs(theta_again - theta_rt) < 1e-10);
  }
}

TEST_CASE("f is strictly increasing below the variance bound") {
  for (double sy2 : {0.8, 1.0, 2.0}) {
    double prev = -1.0;
    const double top = std::sqrt(sy2) * 0.999;
    for (int i = 0; i <= 50; ++i) {
      const double u = top * i / 50.0;
      const double f = linear_bridge_f(u, sy2);
      CHECK(f > prev);
      prev = f;
    }
  }
}

TEST_CASE("multivariate linear bridge") {
  SUBCASE("zero regression gives zero association") {
    Matrix beta = Matrix::Zero(2, 2);
    Matrix theta = theta_from_beta_mvlinear(beta, Matrix::Identity(2, 2),
                                            Matrix::Identity(2, 2));
    CHECK(max_abs(theta) == 0.0);
  }
  SUBCASE("one response column reduces to the linear bridge") {
    LinearBridgeInput in;
    in.beta = (Vector(2) << 0.3, -0.2).finished();
    in.sigma_y2 = 1.5;
    in.cov_x = (Matrix(2, 2) << 1.0, 0.2, 0.2, 0.8).finished();
    Vector theta_lin = theta_from_beta_linear(in);
    Matrix theta_mv = theta_from_beta_mvlinear(
        in.beta, (Matrix(1, 1) << in.sigma_y2).finished(), in.cov_x);
    CHECK(max_abs(theta_mv - theta_lin) < 1e-13);
  }
  SUBCASE("reconstruction on random feasible inputs") {
    auto rng = tests::make_rng(13);
    for (int trial = 0; trial < 30; ++trial) {
      const Index lx = 2, ly = 2;
      Matrix cov_x = tests::random_spd(rng, lx);
      Matrix cov_y = tests::random_spd(rng, ly);
      Matrix beta = 0.1 * tests::random_matrix(rng, lx, ly);
      Matrix cond = cov_y - beta.transpose() * cov_x * beta;
      Matrix theta = theta_from_beta_mvlinear(beta, cov_y, cov_x);
      CHECK(max_abs(theta * cond - beta) < 1e-10);
    }
  }
  SUBCASE("non-positive conditional covariance is rejected") {
    Matrix beta = 5.0 * Matrix::Identity(2, 2);
    CHECK_THROWS_AS(theta_from_beta_mvlinear(beta, Matrix::Identity(2, 2),
                                             Matrix::Identity(2, 2)),
                    DomainError);
  }
}

TEST_CASE("log-linear bridge is the identity") {
  Vector theta = (Vector(2) << 1.5, -2.0).finished();
  CHECK(max_abs(beta_from_theta_loglinear(theta) - theta) == 0.0);
  CHECK(max_abs(beta_from_theta_loglinear(Vector::Zero(3))) == 0.0);
  CHECK(max_abs(beta_from_theta_loglinear(beta_from_theta_loglinear(theta)) -
                theta) == 0.0);
}
