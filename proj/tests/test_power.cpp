#include "lbor/power.hpp"

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

// One-degree-of-freedom noncentral distribution through the normal CDF.
double ncx2_df1_oracle(double x, double delta) {
  const double s = std::sqrt(x), d = std::sqrt(delta);
  return normal_cdf(s - d) - normal_cdf(-s - d);
}

PowerRequest worked_request(double n) {
  PowerRequest req;
  req.theta_prime = (Matrix(1, 1) << std::log(4.0)).finished();
  req.row_marg = Vector::Constant(2, 0.5);
  req.col_marg = Vector::Constant(2, 0.5);
  req.scheme = Scheme::M;
  req.n = n;
  return req;
}

}  // namespace

TEST_CASE("central chi-square distribution") {
  CHECK(noncentral_chisq_cdf(0.0, 1, 0.0) == 0.0);
  CHECK(noncentral_chisq_cdf(3.841459, 1, 0.0) ==
        doctest::Approx(0.95).epsilon(1e-6));
  // identity with the normal distribution for one degree of freedom
  for (double x : {0.5, 1.0, 2.0, 3.841459, 6.0, 10.0}) {
    CHECK(std::abs(chisq_cdf(x, 1) - (2.0 * normal_cdf(std::sqrt(x)) - 1.0)) <
          1e-9);
  }
}

TEST_CASE("noncentral chi-square against the one-dimensional oracle") {
  for (double x : {0.5, 2.0, 3.841459, 8.0, 15.0, 40.0}) {
    for (double delta : {0.1, 1.0, 5.0, 10.676733642626697, 30.0, 80.0}) {
      CHECK(std::abs(noncentral_chisq_cdf(x, 1, delta) -
                     ncx2_df1_oracle(x, delta)) < 1e-9);
    }
  }
}

TEST_CASE("noncentrality shifts mass to the right") {
  const double central = chisq_cdf(6.0, 2);
  const double shifted = noncentral_chisq_cdf(6.0, 2, 10.0);
  CHECK(shifted > 0.0);
  CHECK(shifted < central);
  CHECK(noncentral_chisq_cdf(6.0, 2, 20.0) < shifted);
  // monotone in x
  CHECK(noncentral_chisq_cdf(7.0, 2, 10.0) > shifted);
}

TEST_CASE("large noncentrality stays accurate") {
  // far enough out that the Poisson weights only become representable late
  const double delta = 1600.0;
  const double x = delta + 1.0;
  CHECK(std::abs(noncentral_chisq_cdf(x, 1, delta) -
                 ncx2_df1_oracle(x, delta)) < 1e-9);
}

TEST_CASE("chi-square quantile inverts the distribution") {
  for (int df : {1, 2, 3, 7}) {
    for (double p : {0.5, 0.9, 0.95, 0.99}) {
      const double q = chisq_quantile(p, df);
      CHECK(std::abs(chisq_cdf(q, df) - p) < 1e-9);
    }
  }
  CHECK(chisq_quantile(0.95, 1) == doctest::Approx(3.841459).epsilon(1e-6));
  CHECK_THROWS_AS(chisq_quantile(0.0, 1), DomainError);
}

TEST_CASE("build_alternative") {
  DesignSpec spec = saturated_2x2();
  ModelMatrices mm = build_model_matrices(spec);

  SUBCASE("no association gives the independence table") {
    PowerRequest req = worked_request(100.0);
    req.theta_prime.setZero();
    Alternative alt = build_alternative(req, mm, spec);
    Matrix expect = req.row_marg * req.col_marg.transpose();
    CHECK(max_abs(alt.p_prime.cells - expect) < 1e-12);
  }
  SUBCASE("worked 2x2 alternative covariance") {
    Alternative alt = build_alternative(worked_request(100.0), mm, spec);
    CHECK(alt.theta_cov(0, 0) == doctest::Approx(0.18).epsilon(1e-10));
  }
  SUBCASE("row proportions equal to the row margins change nothing") {
    PowerRequest req = worked_request(100.0);
    req.scheme = Scheme::MR;
    Alternative base = build_alternative(worked_request(100.0), mm, spec);
    req.proportions = base.p_prime.row_totals();
    Alternative alt = build_alternative(req, mm, spec);
    CHECK(max_abs(alt.sampling_density.cells - alt.p_prime.cells) < 1e-12);
    CHECK(std::abs(alt.theta_cov(0, 0) - base.theta_cov(0, 0)) < 1e-12);
  }
  SUBCASE("precision is exactly linear in the sample size") {
    Alternative a1 = build_alternative(worked_request(100.0), mm, spec);
    Alternative a2 = build_alternative(worked_request(200.0), mm, spec);
    CHECK(std::abs(1.0 / a2.theta_cov(0, 0) - 2.0 / a1.theta_cov(0, 0)) <
          1e-10);
  }
}

TEST_CASE("power_at") {
  DesignSpec spec = saturated_2x2();
  ModelMatrices mm = build_model_matrices(spec);
  HypothesisSpec hyp{(Matrix(1, 1) << 1.0).finished(), 0.05};

  SUBCASE("null alternative returns the level exactly") {
    PowerRequest req = worked_request(100.0);
    req.theta_prime.setZero();
    CHECK(power_at(req, hyp, mm, spec) == 0.05);
  }
  SUBCASE("worked value near 0.9045, confirmed by the oracle") {
    const double p = power_at(worked_request(100.0), hyp, mm, spec);
    const double delta = std::pow(std::log(4.0), 2) / 0.18;
    const double oracle = 1.0 - ncx2_df1_oracle(3.8414588206941245, delta);
    CHECK(std::abs(p - oracle) < 1e-8);
    CHECK(p == doctest::Approx(0.9045).epsilon(2e-4));
  }
  SUBCASE("monotone in n, effect size and level") {
    double prev = 0.0;
    for (double n : {20.0, 50.0, 100.0, 200.0, 500.0}) {
      const double p = power_at(worked_request(n), hyp, mm, spec);
      CHECK(p > prev);
      prev = p;
    }
    prev = 0.0;
    for (double effect : {0.2, 0.5, 1.0, 1.5}) {
      PowerRequest req = worked_request(100.0);
      req.theta_prime(0, 0) = effect;
      const double p = power_at(req, hyp, mm, spec);
      CHECK(p > prev);
      prev = p;
    }
    HypothesisSpec strict = hyp;
    strict.alpha = 0.01;
    CHECK(power_at(worked_request(100.0), strict, mm, spec) <
          power_at(worked_request(100.0), hyp, mm, spec));
  }
  SUBCASE("input validation") {
    PowerRequest req = worked_request(100.0);
    req.scheme = Scheme::P;
    CHECK_THROWS_AS(power_at(req, hyp, mm, spec), DomainError);
    HypothesisSpec bad{(Matrix(1, 1) << 1.0).finished(), 1.5};
    CHECK_THROWS_AS(power_at(worked_request(100.0), bad, mm, spec),
                    DomainError);
  }
}

TEST_CASE("required_sample_size") {
  DesignSpec spec = saturated_2x2();
  ModelMatrices mm = build_model_matrices(spec);
  HypothesisSpec hyp{(Matrix(1, 1) << 1.0).finished(), 0.05};

  SUBCASE("tiny target collapses to the smallest sample") {
    PowerRequest req = worked_request(0.0);
    req.target_power = 0.0500001;
    CHECK(required_sample_size(req, hyp, mm, spec) >= 1);
    CHECK(required_sample_size(req, hyp, mm, spec) <= 2);
  }
  SUBCASE("matches a linear scan and brackets the target") {
    PowerRequest req = worked_request(0.0);
    req.target_power = 0.9;
    const long n = required_sample_size(req, hyp, mm, spec);
    auto power_of = [&](long m) {
      PowerRequest r = req;
      r.n = static_cast<double>(m);
      return power_at(r, hyp, mm, spec);
    };
    CHECK(power_of(n) >= 0.9);
    CHECK(power_of(n - 1) < 0.9);
    long scan = 1;
    while (power_of(scan) < 0.9) ++scan;
    CHECK(scan == n);
  }
  SUBCASE("halving the effect roughly quadruples the sample size") {
    PowerRequest small = worked_request(0.0);
    small.theta_prime(0, 0) = 0.25;
    small.target_power = 0.9;
    PowerRequest big = small;
    big.theta_prime(0, 0) = 0.5;
    const double ratio =
        static_cast<double>(required_sample_size(big, hyp, mm, spec)) /
        static_cast<double>(required_sample_size(small, hyp, mm, spec));
    CHECK(ratio > 0.2);
    CHECK(ratio < 0.3);
  }
  SUBCASE("null alternative is unreachable") {
    PowerRequest req = worked_request(0.0);
    req.theta_prime.setZero();
    req.target_power = 0.8;
    CHECK_THROWS_WITH_AS(required_sample_size(req, hyp, mm, spec),
                         doctest::Contains("unreachable"), DomainError);
  }
}

TEST_CASE("wald_test") {
  HypothesisSpec hyp{(Matrix(1, 1) << 1.0).finished(), 0.05};
  Matrix sigma(1, 1);
  sigma << 0.04;

  SUBCASE("null estimate") {
    WaldResult r = wald_test(Vector::Zero(1), sigma, hyp);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK(r.df == 1);
  }
  SUBCASE("scalar case matches the two-sided normal test") {
    Vector theta(1);
    theta << 0.5;
    WaldResult r = wald_test(theta, sigma, hyp);
    CHECK(r.statistic == doctest::Approx(0.25 / 0.04).epsilon(1e-12));
    const double z = 0.5 / 0.2;
    CHECK(std::abs(r.p_value - 2.0 * (1.0 - normal_cdf(z))) < 1e-9);
  }
  SUBCASE("invariant under row mixing of the hypothesis") {
    auto rng = tests::make_rng(17);
    Vector theta = tests::random_matrix(rng, 3, 1).col(0);
    Matrix sig = tests::random_spd(rng, 3);
    Matrix q = tests::random_matrix(rng, 2, 3);
    HypothesisSpec h1{q, 0.05};
    Matrix mix(2, 2);
    mix << 2, 1, 0, -1;
    HypothesisSpec h2{mix * q, 0.05};
    WaldResult r1 = wald_test(theta, sig, h1);
    WaldResult r2 = wald_test(theta, sig, h2);
    CHECK(std::abs(r1.statistic - r2.statistic) < 1e-10);
  }
}

TEST_CASE("transposition duality between row and column conditioning") {
  auto rng = tests::make_rng(19);
  for (int trial = 0; trial < 4; ++trial) {
    const Index J = 2, K = 3, Lx = 2, Ly = 1;
    DesignSpec spec = tests::random_design(rng, J, K, Lx, Ly);
    ModelMatrices mm = build_model_matrices(spec);
    DesignSpec flipped{spec.ytilde, spec.xtilde};
    ModelMatrices mm_flipped = build_model_matrices(flipped);

    PowerRequest req;
    req.theta_prime = tests::random_matrix(rng, Lx, Ly, -0.6, 0.6);
    req.row_marg = tests::random_matrix(rng, J + 1, 1, 0.2, 1.0).col(0);
    req.row_marg /= req.row_marg.sum();
    req.col_marg = tests::random_matrix(rng, K + 1, 1, 0.2, 1.0).col(0);
    req.col_marg /= req.col_marg.sum();
    req.scheme = Scheme::MR;
    req.proportions = Vector::Constant(J + 1, 1.0 / double(J + 1));
    req.n = 300.0;

    PowerRequest dual;
    dual.theta_prime = req.theta_prime.transpose();
    dual.row_marg = req.col_marg;
    dual.col_marg = req.row_marg;
    dual.scheme = Scheme::MC;
    dual.proportions = req.proportions;
    dual.n = req.n;

    Matrix q = tests::random_matrix(rng, 1, Lx * Ly);
    HypothesisSpec hyp{q, 0.05};
    // the transposed parameter stacks in the commuted order
    Matrix commute = tests::commutation_matrix(Lx, Ly);
    HypothesisSpec hyp_dual{q * commute.transpose(), 0.05};

    const double p1 = power_at(req, hyp, mm, spec);
    const double p2 = power_at(dual, hyp_dual, mm_flipped, flipped);
    CHECK(std::abs(p1 - p2) < 1e-10);
  }
}

TEST_CASE("proportion grid search") {
  DesignSpec spec = saturated_2x2();
  ModelMatrices mm = build_model_matrices(spec);
  HypothesisSpec hyp{(Matrix(1, 1) << 1.0).finished(), 0.05};
  PowerRequest req = worked_request(60.0);
  req.scheme = Scheme::MR;
  req.proportions = Vector::Constant(2, 0.5);

  ProportionSearchResult best = optimal_proportions(req, hyp, mm, spec, 10);
  CHECK(best.power >= power_at(req, hyp, mm, spec) - 1e-12);
  CHECK(best.proportions.sum() == doctest::Approx(1.0));
  ProportionSearchResult again = optimal_proportions(req, hyp, mm, spec, 10);
  CHECK(max_abs(again.proportions - best.proportions) == 0.0);
  CHECK_THROWS_AS(optimal_proportions(req, hyp, mm, spec, 1), DomainError);
}
