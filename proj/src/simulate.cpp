#include "lbor/simulate.hpp"

#include "lbor/asycov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace lbor {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

long round_count(double x, const char* what) {
  const double r = std::nearbyint(x);
  if (!std::isfinite(x) || std::abs(x - r) > 1e-9 || r < 0) {
    std::ostringstream msg;
    msg << what << " = " << x << " must be a nonnegative integer";
    throw DomainError(msg.str());
  }
  return static_cast<long>(r);
}

}  // namespace

std::uint64_t SplitMix64::next() {
  state_ += kGolden;
  return mix64(state_);
}

double SplitMix64::uniform01() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

SplitMix64 replicate_rng(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = mix64(seed + kGolden);
  const std::uint64_t b = mix64(~index * 0xC2B2AE3D27D4EB4Full + 0x165667B19E3779F9ull);
  return SplitMix64(a ^ b);
}

namespace {

// Inversion by walking the pmf from 0; expected O(n*p) steps.
long binomial_inversion(long n, double p, SplitMix64& rng) {
  const double q = 1.0 - p;
  const double s = p / q;
  double f = std::exp(static_cast<double>(n) * std::log1p(-p));
  double u = rng.uniform01();
  long x = 0;
  while (u > f && x < n) {
    u -= f;
    ++x;
    f *= s * static_cast<double>(n - x + 1) / static_cast<double>(x);
  }
  return x;
}

// Transformed rejection with exact log-pmf acceptance; requires n*p >= 10
// and p <= 0.5.
long binomial_btrs(long n, double p, SplitMix64& rng) {
  const double nd = static_cast<double>(n);
  const double spq = std::sqrt(nd * p * (1.0 - p));
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double r = p / (1.0 - p);
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double lr = std::log(r);
  const double m = std::floor((nd + 1.0) * p);

  for (;;) {
    const double u = rng.uniform01() - 0.5;
    double v = rng.uniform01();
    const double us = 0.5 - std::abs(u);
    const double kd = std::floor((2.0 * a / us + b) * u + c);
    if (kd < 0.0 || kd > nd) continue;
    if (us >= 0.07 && v <= v_r) return static_cast<long>(kd);
    v = std::log(v * alpha / (a / (us * us) + b));
    const double accept = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0) -
                          std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) +
                          (kd - m) * lr;
    if (v <= accept) return static_cast<long>(kd);
  }
}

// Multiplicative inversion for small means.
long poisson_inversion(double mean, SplitMix64& rng) {
  const double limit = std::exp(-mean);
  double prod = 1.0;
  long k = 0;
  for (;;) {
    prod *= rng.uniform01();
    if (prod <= limit) return k;
    ++k;
  }
}

// Transformed rejection for mean >= 10 (Hormann's PTRS).
long poisson_ptrs(double mean, SplitMix64& rng) {
  const double lmu = std::log(mean);
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);

  for (;;) {
    const double u = rng.uniform01() - 0.5;
    double v = rng.uniform01();
    const double us = 0.5 - std::abs(u);
    const double kd = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long>(kd);
    if (kd < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kd * lmu - mean - std::lgamma(kd + 1.0)) {
      return static_cast<long>(kd);
    }
  }
}

}  // namespace

long sample_binomial(long n, double p, SplitMix64& rng) {
  if (n < 0 || !(p >= 0.0) || !(p <= 1.0)) {
    throw DomainError("sample_binomial: need n >= 0 and p in [0,1]");
  }
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  const bool flip = p > 0.5;
  const double q = flip ? 1.0 - p : p;
  const long x = (static_cast<double>(n) * q < 10.0)
                     ? binomial_inversion(n, q, rng)
                     : binomial_btrs(n, q, rng);
  return flip ? n - x : x;
}

long sample_poisson(double mean, SplitMix64& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw DomainError("sample_poisson: mean must be finite and nonnegative");
  }
  if (mean == 0.0) return 0;
  return mean < 10.0 ? poisson_inversion(mean, rng) : poisson_ptrs(mean, rng);
}

std::vector<long> sample_multinomial(long n, const Vector& probs,
                                     SplitMix64& rng) {
  if (n < 0) throw DomainError("sample_multinomial: n must be nonnegative");
  if (probs.size() == 0 || probs.minCoeff() < 0.0 ||
      std::abs(probs.sum() - 1.0) > 1e-8) {
    throw DomainError(
        "sample_multinomial: probabilities must be nonnegative and sum to 1");
  }
  std::vector<long> counts(static_cast<std::size_t>(probs.size()), 0);
  long remaining = n;
  double mass = 1.0;
  for (Index i = 0; i + 1 < probs.size(); ++i) {
    if (remaining == 0) break;
    double pc = mass > 0.0 ? probs(i) / mass : 1.0;
    pc = std::clamp(pc, 0.0, 1.0);
    const long c = sample_binomial(remaining, pc, rng);
    counts[static_cast<std::size_t>(i)] = c;
    remaining -= c;
    mass -= probs(i);
  }
  counts.back() = remaining;
  return counts;
}

void SimulationConfig::validate() const {
  density.validate();
  if (!density.strictly_positive()) {
    throw DomainError("simulation density must be strictly positive");
  }
  if (std::abs(density.total() - 1.0) > 1e-8) {
    throw DomainError("simulation density must sum to 1");
  }
  if (replications < 1) {
    throw DomainError("replications must be at least 1");
  }
  scheme.validate(density.num_rows_minus_one(), density.num_cols_minus_one());
}

ContingencyTable sample_table(const SimulationConfig& config,
                              long replicate_index) {
  config.validate();
  const Index J = config.density.num_rows_minus_one();
  const Index K = config.density.num_cols_minus_one();
  const Index rows = J + 1;
  SplitMix64 rng =
      replicate_rng(config.seed, static_cast<std::uint64_t>(replicate_index));

  Matrix out = Matrix::Zero(rows, K + 1);
  switch (config.scheme.scheme) {
    case Scheme::M: {
      const long n = round_count(config.scheme.total_n, "total sample size");
      const auto counts =
          sample_multinomial(n, config.density.to_vec(), rng);
      for (Index i = 0; i < config.density.cell_count(); ++i)
        out(i % rows, i / rows) = static_cast<double>(counts[i]);
      break;
    }
    case Scheme::P: {
      const long n = sample_poisson(config.scheme.nu, rng);
      const auto counts =
          sample_multinomial(n, config.density.to_vec(), rng);
      for (Index i = 0; i < config.density.cell_count(); ++i)
        out(i % rows, i / rows) = static_cast<double>(counts[i]);
      break;
    }
    case Scheme::MR: {
      const Vector rt = config.density.row_totals();
      for (Index j = 0; j <= J; ++j) {
        const long nj =
            round_count(config.scheme.row_sizes(j), "row subsample size");
        Vector cond = config.density.cells.row(j).transpose() / rt(j);
        const auto counts = sample_multinomial(nj, cond, rng);
        for (Index k = 0; k <= K; ++k)
          out(j, k) = static_cast<double>(counts[static_cast<std::size_t>(k)]);
      }
      break;
    }
    case Scheme::MC: {
      const Vector ct = config.density.col_totals();
      for (Index k = 0; k <= K; ++k) {
        const long mk =
            round_count(config.scheme.col_sizes(k), "column subsample size");
        Vector cond = config.density.cells.col(k) / ct(k);
        const auto counts = sample_multinomial(mk, cond, rng);
        for (Index j = 0; j <= J; ++j)
          out(j, k) = static_cast<double>(counts[static_cast<std::size_t>(j)]);
      }
      break;
    }
  }
  return ContingencyTable(std::move(out), TableKind::ObservedCounts);
}

MonteCarloReport monte_carlo_cov(const SimulationConfig& config,
                                 const ModelMatrices& mm,
                                 const DesignSpec& spec, int threads,
                                 bool keep_draws) {
  config.validate();
  const ContingencyTable mu_theory = expected_table(config.density, config.scheme);

  MonteCarloReport report;
  if (mu_theory.cells.minCoeff() < config.min_expected_cell) {
    std::ostringstream msg;
    msg << "smallest expected cell " << mu_theory.cells.minCoeff()
        << " is below the guard of " << config.min_expected_cell;
    report.warnings.push_back(msg.str());
  }
  report.asymptotic_cov = theta_cov_projection(mu_theory, mm);

  const long reps = config.replications;
  const Index L = mm.assoc_dim();
  std::vector<Vector> draws(static_cast<std::size_t>(reps));
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);

  auto worker = [&](long begin, long end) {
    for (long i = begin; i < end; ++i) {
      const ContingencyTable t = sample_table(config, i);
      if (t.row_totals().minCoeff() <= 0.0 || t.col_totals().minCoeff() <= 0.0)
        continue;
      try {
        FitResult fit = fit_loglinear(t, mm);
        draws[static_cast<std::size_t>(i)] = fit.theta_vec;
        ok[static_cast<std::size_t>(i)] = 1;
      } catch (const ConvergenceError&) {
      } catch (const SingularError&) {
      }
    }
  };

  int nthreads = threads > 0
                     ? threads
                     : static_cast<int>(std::min<unsigned>(
                           std::max(1u, std::thread::hardware_concurrency()), 8));
  nthreads = static_cast<int>(
      std::min<long>(nthreads, std::max<long>(1, reps)));
  if (nthreads <= 1) {
    worker(0, reps);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (reps + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const long begin = t * chunk;
      const long end = std::min(reps, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  // Reduce in replicate order so the report is independent of threading.
  Vector sum = Vector::Zero(L);
  long n_success = 0;
  for (long i = 0; i < reps; ++i) {
    if (!ok[static_cast<std::size_t>(i)]) continue;
    sum += draws[static_cast<std::size_t>(i)];
    ++n_success;
  }
  report.n_success = n_success;
  report.n_failed_fits = reps - n_success;
  if (n_success == 0) {
    throw ConvergenceError("monte_carlo_cov: every replicate failed to fit");
  }
  report.theta_mean = sum / static_cast<double>(n_success);

  if (n_success >= 2) {
    Matrix ss = Matrix::Zero(L, L);
    for (long i = 0; i < reps; ++i) {
      if (!ok[static_cast<std::size_t>(i)]) continue;
      const Vector d = draws[static_cast<std::size_t>(i)] - report.theta_mean;
      ss += d * d.transpose();
    }
    report.empirical_cov = ss / static_cast<double>(n_success - 1);
    report.empirical_defined = true;
    const double scale = report.asymptotic_cov.cwiseAbs().maxCoeff();
    report.max_relative_error =
        (report.empirical_cov - report.asymptotic_cov).cwiseAbs().maxCoeff() /
        scale;
  } else {
    report.empirical_cov = Matrix::Zero(L, L);
    report.empirical_defined = false;
    report.warnings.push_back(
        "empirical covariance undefined: fewer than two successful "
        "replicates");
  }

  if (keep_draws) {
    report.theta_draws.resize(n_success, L);
    Index r = 0;
    for (long i = 0; i < reps; ++i) {
      if (!ok[static_cast<std::size_t>(i)]) continue;
      report.theta_draws.row(r++) = draws[static_cast<std::size_t>(i)].transpose();
    }
  }
  return report;
}

}  // namespace lbor
