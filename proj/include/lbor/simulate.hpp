#pragma once

#include "lbor/design.hpp"
#include "lbor/fit.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lbor {

// SplitMix64: the state walks a fixed 64-bit increment and each output is a
// finalizer of the state, so any (seed, stream) pair yields a reproducible
// sequence independent of call order elsewhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next();
  double uniform01();  // 53-bit mantissa, in [0, 1)

 private:
  std::uint64_t state_;
};

// Independent stream for one replicate; identical (seed, index) pairs give
// identical streams.
SplitMix64 replicate_rng(std::uint64_t seed, std::uint64_t index);

// Exact samplers: inversion for small expected counts, transformed rejection
// (Hormann's BTRS / PTRS) for large.
long sample_binomial(long n, double p, SplitMix64& rng);
long sample_poisson(double mean, SplitMix64& rng);

// Sequential binomial conditioning; probs must be nonnegative and sum to 1.
std::vector<long> sample_multinomial(long n, const Vector& probs,
                                     SplitMix64& rng);

struct SimulationConfig {
  ContingencyTable density;  // strictly positive joint density, sums to 1
  SchemeSpec scheme;
  long replications = 1;
  std::uint64_t seed = 0;
  double min_expected_cell = 5.0;

  void validate() const;
};

// One table drawn under the scheme. M fixes the grand total, MR the row
// totals, MC the column totals; P fixes nothing (total drawn first, then
// classified multinomially).
ContingencyTable sample_table(const SimulationConfig& config,
                              long replicate_index);

struct MonteCarloReport {
  long n_success = 0;
  long n_failed_fits = 0;
  Vector theta_mean;
  Matrix empirical_cov;
  bool empirical_defined = false;  // needs at least two successful fits
  Matrix asymptotic_cov;           // at the theoretical expected table
  double max_relative_error = 0.0;
  std::vector<std::string> warnings;
  Matrix theta_draws;  // n_success x L, kept when requested
};

// Fits every replicate and compares the empirical covariance of the
// association estimates with the asymptotic one. Replicates with a zero
// row/column total or a failed fit are excluded and counted. The reduction
// runs in replicate order, so the report does not depend on `threads`.
MonteCarloReport monte_carlo_cov(const SimulationConfig& config,
                                 const ModelMatrices& mm,
                                 const DesignSpec& spec, int threads = 0,
                                 bool keep_draws = false);

}  // namespace lbor
