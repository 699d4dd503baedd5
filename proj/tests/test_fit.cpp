#include "lbor/fit.hpp"

#include "lbor/matkit.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace lbor;

namespace {

double max_abs(const Matrix& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

DesignSpec saturated_2x2() {
  return {(Matrix(1, 1) << 1.0).finished(), (Matrix(1, 1) << 1.0).finished()};
}

}  // namespace

TEST_CASE("saturated 2x2 fit reproduces the table and the log cross-ratio") {
  ModelMatrices mm = build_model_matrices(saturated_2x2());
  ContingencyTable table{(Matrix(2, 2) << 10, 20, 30, 40).finished()};
  FitResult fit = fit_loglinear(table, mm);
  CHECK(fit.converged);
  CHECK(max_abs(fit.mu_hat.cells - table.cells) < 1e-8);
  CHECK(fit.theta_vec(0) == doctest::Approx(std::log(2.0 / 3.0)).epsilon(1e-10));
  CHECK(fit.alpha_hat == doctest::Approx(std::log(10.0)).epsilon(1e-8));
  CHECK(fit.rho_hat(0) == doctest::Approx(std::log(3.0)).epsilon(1e-8));
  CHECK(fit.gamma_hat(0) == doctest::Approx(std::log(2.0)).epsilon(1e-8));
}

TEST_CASE("independence model fits the product of the margins") {
  // empty score matrices drop the association term entirely
  DesignSpec spec{Matrix(2, 0), Matrix(2, 0)};
  ModelMatrices mm = build_model_matrices(spec);
  CHECK(mm.assoc_dim() == 0);

  auto rng = tests::make_rng(17);
  ContingencyTable table = tests::random_positive_table(rng, 2, 2);
  FitResult fit = fit_loglinear(table, mm);
  const double n = table.total();
  Matrix expect =
      table.row_totals() * table.col_totals().transpose() / n;
  CHECK(max_abs(fit.mu_hat.cells - expect) < 1e-9 * n);
  CHECK(fit.theta_vec.size() == 0);
}

TEST_CASE("fit recovers the generating parameters from a model table") {
  auto rng = tests::make_rng(29);
  for (int trial = 0; trial < 6; ++trial) {
    DesignSpec spec = tests::random_design(rng, 3, 2, 2, 1);
    ModelMatrices mm = build_model_matrices(spec);
    ContingencyTable mu = tests::model_table(rng, mm);
    auto [gamma_true, theta_true] = extract_parameters(mu.to_vec().array().log(), mm);

    FitResult fit = fit_loglinear(mu, mm);
    CHECK(max_abs(fit.theta_vec - theta_true) < 1e-8);
    CHECK(max_abs(fit.gamma_hat - gamma_true) < 1e-8);
    CHECK(max_abs(fit.mu_hat.cells - mu.cells) < 1e-7);
  }
}

TEST_CASE("fitted margins match the observed margins") {
  auto rng = tests::make_rng(41);
  for (int trial = 0; trial < 8; ++trial) {
    DesignSpec spec = tests::random_design(rng, 3, 3, 1, 1);
    ModelMatrices mm = build_model_matrices(spec);
    ContingencyTable table = tests::random_positive_table(rng, 3, 3);
    FitResult fit = fit_loglinear(table, mm);
    const double n = table.total();
    CHECK(max_abs(fit.mu_hat.row_totals() - table.row_totals()) < 1e-8 * n);
    CHECK(max_abs(fit.mu_hat.col_totals() - table.col_totals()) < 1e-8 * n);
    // the log cross-ratios of the fit live in the interaction span
    Vector psi = fit.mu_hat.to_vec().array().log();
    Vector recon = mm.contrast.transpose() * psi -
                   mm.interaction_core * fit.theta_vec;
    CHECK(max_abs(recon) < 1e-8);
  }
}

TEST_CASE("zero cell in a saturated model reports non-existence") {
  ModelMatrices mm = build_model_matrices(saturated_2x2());
  ContingencyTable table{(Matrix(2, 2) << 0, 10, 10, 10).finished()};
  CHECK_THROWS_WITH_AS(fit_loglinear(table, mm),
                       doctest::Contains("smallest fitted cell"),
                       ConvergenceError);
}

TEST_CASE("zero margins are rejected up front") {
  ModelMatrices mm = build_model_matrices(saturated_2x2());
  ContingencyTable table{(Matrix(2, 2) << 0, 0, 10, 10).finished()};
  CHECK_THROWS_WITH_AS(fit_loglinear(table, mm), doctest::Contains("row 0"),
                       DomainError);
}

TEST_CASE("extract_parameters") {
  auto rng = tests::make_rng(53);
  DesignSpec spec = tests::random_design(rng, 2, 2, 1, 2);
  ModelMatrices mm = build_model_matrices(spec);

  SUBCASE("zero log-expectations give zero parameters") {
    auto [gamma, theta] = extract_parameters(Vector::Zero(mm.cell_count()), mm);
    CHECK(max_abs(gamma) == 0.0);
    CHECK(max_abs(theta) == 0.0);
  }
  SUBCASE("forward-built log-expectations extract exactly") {
    Vector coef(mm.model_basis.cols());
    coef << 1.0, 0.3, -0.2, 0.5, -0.4, 0.25, -0.15;
    Vector eta = mm.model_basis * coef;
    auto [gamma, theta] = extract_parameters(eta, mm);
    CHECK(max_abs(gamma - coef.segment(3, 2)) < 1e-12);
    CHECK(max_abs(theta - coef.tail(2)) < 1e-12);
  }
  SUBCASE("intercept and row perturbations leave theta untouched") {
    Vector eta = mm.model_basis * Vector::Ones(mm.model_basis.cols());
    auto [gamma0, theta0] = extract_parameters(eta, mm);
    Vector shifted = eta + 0.7 * Vector::Ones(eta.size()) +
                     1.3 * mm.row_indicator.col(1) - 0.4 * mm.row_indicator.col(2);
    auto [gamma1, theta1] = extract_parameters(shifted, mm);
    CHECK(max_abs(theta1 - theta0) < 1e-12);
    (void)gamma0;
    (void)gamma1;
  }
}

TEST_CASE("ipf: independence at zero association") {
  ModelMatrices mm = build_model_matrices(saturated_2x2());
  Vector rm(2), cm(2);
  rm << 0.3, 0.7;
  cm << 0.6, 0.4;
  ContingencyTable p = ipf_constrained(Matrix::Zero(1, 1), rm, cm, mm);
  Matrix expect = rm * cm.transpose();
  CHECK(max_abs(p.cells - expect) < 1e-12);
}

TEST_CASE("ipf: worked 2x2 case with log 4 association") {
  ModelMatrices mm = build_model_matrices(saturated_2x2());
  Vector half = Vector::Constant(2, 0.5);
  Matrix theta(1, 1);
  theta << std::log(4.0);
  ContingencyTable p = ipf_constrained(theta, half, half, mm);
  Matrix expect(2, 2);
  expect << 1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3;
  CHECK(max_abs(p.cells - expect) < 1e-10);
  CHECK(std::abs(p.row_totals()(0) - 0.5) < 1e-12);
  CHECK(std::abs(p.col_totals()(1) - 0.5) < 1e-12);
}

TEST_CASE("ipf: rescaling never disturbs the cross-ratios") {
  auto rng = tests::make_rng(67);
  for (int trial = 0; trial < 6; ++trial) {
    DesignSpec spec = tests::random_design(rng, 2, 3, 2, 1);
    ModelMatrices mm = build_model_matrices(spec);
    Matrix theta = tests::random_matrix(rng, 2, 1, -0.8, 0.8);
    Vector rm = tests::random_matrix(rng, 3, 1, 0.2, 1.0).col(0);
    rm /= rm.sum();
    Vector cm = tests::random_matrix(rng, 4, 1, 0.2, 1.0).col(0);
    cm /= cm.sum();
    ContingencyTable p = ipf_constrained(theta, rm, cm, mm);
    Vector log_ratios = mm.contrast.transpose() * p.to_vec().array().log().matrix();
    CHECK(max_abs(log_ratios - mm.interaction_core * vec(theta)) < 1e-10);
    // deterministic
    ContingencyTable again = ipf_constrained(theta, rm, cm, mm);
    CHECK(max_abs(again.cells - p.cells) == 0.0);
  }
}

TEST_CASE("ipf: input validation") {
  ModelMatrices mm = build_model_matrices(saturated_2x2());
  Vector half = Vector::Constant(2, 0.5);
  Vector bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(ipf_constrained(Matrix::Zero(1, 1), bad, half, mm),
                  DomainError);
  Vector unnormalized(2);
  unnormalized << 0.5, 0.6;
  CHECK_THROWS_AS(ipf_constrained(Matrix::Zero(1, 1), unnormalized, half, mm),
                  DomainError);
}

TEST_CASE("expected_table under each scheme") {
  ContingencyTable uniform{
      (Matrix(2, 2) << 0.25, 0.25, 0.25, 0.25).finished(),
      TableKind::Expected};
  ContingencyTable p{(Matrix(2, 2) << 0.1, 0.3, 0.2, 0.4).finished(),
                     TableKind::Expected};

  ContingencyTable m = expected_table(uniform, SchemeSpec::multinomial(100));
  CHECK(max_abs(m.cells - Matrix::Constant(2, 2, 25.0)) < 1e-12);

  ContingencyTable pois = expected_table(p, SchemeSpec::poisson(50));
  CHECK(pois.cells(1, 1) == doctest::Approx(20.0));

  Vector nj(2);
  nj << 50, 50;
  ContingencyTable mr = expected_table(p, SchemeSpec::rows(nj));
  CHECK(mr.cells(0, 0) == doctest::Approx(12.5));
  CHECK(mr.cells(0, 1) == doctest::Approx(37.5));
  CHECK(mr.cells(1, 0) == doctest::Approx(50.0 / 3.0));
  CHECK(mr.cells(1, 1) == doctest::Approx(100.0 / 3.0));
  CHECK(max_abs(mr.row_totals() - nj) < 1e-12);

  Vector mk(2);
  mk << 60, 40;
  ContingencyTable mc = expected_table(p, SchemeSpec::cols(mk));
  CHECK(max_abs(mc.col_totals() - mk) < 1e-12);

  ContingencyTable not_density{(Matrix(2, 2) << 1, 2, 3, 4).finished()};
  CHECK_THROWS_AS(expected_table(not_density, SchemeSpec::multinomial(10)),
                  DomainError);
}

TEST_CASE("alternative density round trip recovers the association") {
  auto rng = tests::make_rng(83);
  DesignSpec spec = tests::random_design(rng, 2, 2, 1, 1);
  ModelMatrices mm = build_model_matrices(spec);
  Matrix theta(1, 1);
  theta << 0.4;
  Vector rm = Vector::Constant(3, 1.0 / 3.0);
  Vector cm = Vector::Constant(3, 1.0 / 3.0);
  ContingencyTable p = ipf_constrained(theta, rm, cm, mm);

  for (auto scheme : {SchemeSpec::multinomial(900), SchemeSpec::poisson(900),
                      SchemeSpec::rows(Vector::Constant(3, 300.0)),
                      SchemeSpec::cols(Vector::Constant(3, 300.0))}) {
    ContingencyTable mu = expected_table(p, scheme);
    FitResult fit = fit_loglinear(mu, mm);
    CHECK(std::abs(fit.theta_vec(0) - 0.4) < 1e-8);
  }
}
