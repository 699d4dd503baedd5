#include "lbor/simulate.hpp"

#include "lbor/fit.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace lbor;

namespace {

double max_abs(const Matrix& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

ContingencyTable uniform_2x2() {
  return ContingencyTable{Matrix::Constant(2, 2, 0.25), TableKind::Expected};
}

}  // namespace

TEST_CASE("splitmix64 streams are reproducible and distinct") {
  SplitMix64 a = replicate_rng(42, 7);
  SplitMix64 b = replicate_rng(42, 7);
  SplitMix64 c = replicate_rng(42, 8);
  bool all_equal = true;
  bool any_differs = false;
  for (int i = 0; i < 32; ++i) {
    const auto x = a.next();
    all_equal = all_equal && (x == b.next());
    any_differs = any_differs || (x != c.next());
  }
  CHECK(all_equal);
  CHECK(any_differs);

  SplitMix64 u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform01();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("binomial sampler moments on both code paths") {
  SplitMix64 rng(987);
  SUBCASE("inversion path (small n*p)") {
    const int draws = 20000;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) sum += sample_binomial(80, 0.05, rng);
    const double mean = sum / draws;  // expect 4, sd 1.95
    CHECK(std::abs(mean - 4.0) < 5.0 * 1.95 / std::sqrt(double(draws)));
  }
  SUBCASE("rejection path (large n*p)") {
    const int draws = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double x = sample_binomial(1000, 0.3, rng);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / draws;
    const double var = sum2 / draws - mean * mean;
    CHECK(std::abs(mean - 300.0) <
          5.0 * std::sqrt(1000 * 0.3 * 0.7 / draws));
    CHECK(var == doctest::Approx(210.0).epsilon(0.10));
  }
  SUBCASE("edges") {
    CHECK(sample_binomial(0, 0.4, rng) == 0);
    CHECK(sample_binomial(10, 0.0, rng) == 0);
    CHECK(sample_binomial(10, 1.0, rng) == 10);
    CHECK_THROWS_AS(sample_binomial(-1, 0.5, rng), DomainError);
  }
}

TEST_CASE("poisson sampler moments on both code paths") {
  SplitMix64 rng(555);
  for (double mean : {3.0, 50.0}) {
    const int draws = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double x = sample_poisson(mean, rng);
      sum += x;
      sum2 += x * x;
    }
    const double m = sum / draws;
    const double var = sum2 / draws - m * m;
    CHECK(std::abs(m - mean) < 5.0 * std::sqrt(mean / draws));
    CHECK(var == doctest::Approx(mean).epsilon(0.10));
  }
  CHECK(sample_poisson(0.0, rng) == 0);
}

TEST_CASE("multinomial conditioning keeps the total") {
  SplitMix64 rng(777);
  Vector p(4);
  p << 0.1, 0.2, 0.3, 0.4;
  for (int i = 0; i < 200; ++i) {
    auto counts = sample_multinomial(50, p, rng);
    long total = 0;
    for (long c : counts) {
      CHECK(c >= 0);
      total += c;
    }
    CHECK(total == 50);
  }
}

TEST_CASE("sample_table determinism and marginal preservation") {
  SimulationConfig config;
  config.density = ContingencyTable{
      (Matrix(3, 3) << 0.10, 0.08, 0.12, 0.11, 0.14, 0.05, 0.09, 0.13, 0.18)
          .finished(),
      TableKind::Expected};
  config.seed = 20240601;
  config.replications = 50;

  SUBCASE("multinomial keeps the grand total") {
    config.scheme = SchemeSpec::multinomial(400);
    for (long i = 0; i < 50; ++i) {
      ContingencyTable t = sample_table(config, i);
      CHECK(t.total() == doctest::Approx(400.0));
    }
    ContingencyTable a = sample_table(config, 3);
    ContingencyTable b = sample_table(config, 3);
    CHECK(max_abs(a.cells - b.cells) == 0.0);
  }
  SUBCASE("row scheme fixes every row total") {
    Vector nj(3);
    nj << 100, 150, 50;
    config.scheme = SchemeSpec::rows(nj);
    for (long i = 0; i < 50; ++i) {
      CHECK(max_abs(sample_table(config, i).row_totals() - nj) == 0.0);
    }
  }
  SUBCASE("column scheme fixes every column total") {
    Vector mk(3);
    mk << 70, 90, 140;
    config.scheme = SchemeSpec::cols(mk);
    for (long i = 0; i < 50; ++i) {
      CHECK(max_abs(sample_table(config, i).col_totals() - mk) == 0.0);
    }
  }
  SUBCASE("zero row subsample sizes leave empty rows") {
    Vector nj(3);
    nj << 0, 120, 0;
    config.scheme = SchemeSpec::rows(nj);
    ContingencyTable t = sample_table(config, 0);
    CHECK(t.row_totals()(0) == 0.0);
    CHECK(t.row_totals()(1) == 120.0);
    CHECK(t.row_totals()(2) == 0.0);
  }
  SUBCASE("poisson scheme varies the total") {
    config.scheme = SchemeSpec::poisson(300);
    double first = sample_table(config, 0).total();
    bool varies = false;
    for (long i = 1; i < 20 && !varies; ++i) {
      varies = sample_table(config, i).total() != first;
    }
    CHECK(varies);
  }
}

TEST_CASE("large multinomial stays within five sigma of its expectation") {
  SimulationConfig config;
  config.density = uniform_2x2();
  config.scheme = SchemeSpec::multinomial(1000000);
  config.seed = 99;
  ContingencyTable t = sample_table(config, 0);
  const double sigma = std::sqrt(1e6 * 0.25 * 0.75);
  CHECK(max_abs(t.cells - Matrix::Constant(2, 2, 250000.0)) < 5.0 * sigma);
}

TEST_CASE("monte carlo report basics") {
  DesignSpec spec{(Matrix(1, 1) << 1.0).finished(),
                  (Matrix(1, 1) << 1.0).finished()};
  ModelMatrices mm = build_model_matrices(spec);

  SimulationConfig config;
  // density with log cross-ratio log(2)
  ModelMatrices mm2 = mm;
  Matrix theta(1, 1);
  theta << std::log(2.0);
  config.density = ipf_constrained(theta, Vector::Constant(2, 0.5),
                                   Vector::Constant(2, 0.5), mm2);
  config.scheme = SchemeSpec::multinomial(500);
  config.seed = 4242;

  SUBCASE("single replicate leaves the covariance undefined") {
    config.replications = 1;
    MonteCarloReport rep = monte_carlo_cov(config, mm, spec);
    CHECK(rep.n_success + rep.n_failed_fits == 1);
    CHECK_FALSE(rep.empirical_defined);
  }
  SUBCASE("reports are identical across thread counts") {
    config.replications = 200;
    MonteCarloReport serial = monte_carlo_cov(config, mm, spec, 1);
    MonteCarloReport parallel = monte_carlo_cov(config, mm, spec, 4);
    CHECK(serial.n_success == parallel.n_success);
    CHECK(max_abs(serial.empirical_cov - parallel.empirical_cov) == 0.0);
    CHECK(max_abs(serial.theta_mean - parallel.theta_mean) == 0.0);
  }
  SUBCASE("moderate run lands near the asymptotic covariance") {
    config.replications = 2000;
    MonteCarloReport rep = monte_carlo_cov(config, mm, spec, 0, true);
    CHECK(rep.empirical_defined);
    CHECK(rep.max_relative_error < 0.25);
    CHECK(rep.theta_draws.rows() == rep.n_success);
    CHECK(std::abs(rep.theta_mean(0) - std::log(2.0)) < 0.05);
  }
  SUBCASE("guard warning fires for small expected cells") {
    config.replications = 2;
    config.min_expected_cell = 1e9;
    MonteCarloReport rep = monte_carlo_cov(config, mm, spec);
    REQUIRE(!rep.warnings.empty());
  }
}

TEST_CASE("monte carlo with no usable replicate reports failure") {
  DesignSpec spec{(Matrix(1, 1) << 1.0).finished(),
                  (Matrix(1, 1) << 1.0).finished()};
  ModelMatrices mm = build_model_matrices(spec);
  SimulationConfig config;
  config.density = ContingencyTable{Matrix::Constant(2, 2, 0.25),
                                    TableKind::Expected};
  // a single observation always leaves an empty row or column
  config.scheme = SchemeSpec::multinomial(1);
  config.replications = 20;
  config.seed = 1;
  CHECK_THROWS_AS(monte_carlo_cov(config, mm, spec), ConvergenceError);
}

TEST_CASE("monte carlo coverage on a 3x3 design") {
  auto rng = tests::make_rng(31337);
  DesignSpec spec = tests::random_design(rng, 2, 2, 1, 1);
  ModelMatrices mm = build_model_matrices(spec);
  Matrix theta(1, 1);
  theta << 0.5;
  Vector thirds = Vector::Constant(3, 1.0 / 3.0);
  SimulationConfig config;
  config.density = ipf_constrained(theta, thirds, thirds, mm);
  config.scheme = SchemeSpec::multinomial(2000);
  config.seed = 8080;
  config.replications = 4000;
  MonteCarloReport rep = monte_carlo_cov(config, mm, spec);
  CHECK(rep.n_failed_fits == 0);
  CHECK(rep.max_relative_error < 0.10);
}
