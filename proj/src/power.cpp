#include "lbor/power.hpp"

#include "lbor/matkit.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

namespace lbor {

namespace {

// Regularized lower incomplete gamma P(a, x): series for x < a+1, Lentz
// continued fraction for the upper tail otherwise.
double lower_regularized_gamma(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int i = 0; i < 1000; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  double b = x + 1.0 - a;
  double c = 1e300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

}  // namespace

double chisq_cdf(double x, int df) {
  if (df < 1) throw DomainError("chisq_cdf: df must be at least 1");
  if (x <= 0.0) return 0.0;
  return lower_regularized_gamma(0.5 * df, 0.5 * x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double noncentral_chisq_cdf(double x, int df, double noncentrality) {
  if (df < 1) throw DomainError("noncentral_chisq_cdf: df must be at least 1");
  if (!(x >= 0.0)) throw DomainError("noncentral_chisq_cdf: x must be >= 0");
  if (!(noncentrality >= 0.0)) {
    throw DomainError("noncentral_chisq_cdf: noncentrality must be >= 0");
  }
  if (x == 0.0) return 0.0;
  if (noncentrality == 0.0) return chisq_cdf(x, df);

  const double lam = 0.5 * noncentrality;
  const double half_x = 0.5 * x;
  const double log_lam = std::log(lam);

  double term = lower_regularized_gamma(0.5 * df, half_x);
  double sum = 0.0;
  double cum_weight = 0.0;
  for (long i = 0; i <= 200000; ++i) {
    const double logw = -lam + i * log_lam - std::lgamma(i + 1.0);
    const double w = std::exp(logw);
    sum += w * term;
    cum_weight += w;
    if (1.0 - cum_weight < 1e-14) break;
    // P(a+1, x) = P(a, x) - x^a e^-x / Gamma(a+1)
    const double a = 0.5 * df + i;
    term -= std::exp(a * std::log(half_x) - half_x - std::lgamma(a + 1.0));
    if (term < 0.0) term = 0.0;
  }
  return std::min(1.0, std::max(0.0, sum));
}

double chisq_quantile(double prob, int df) {
  if (!(prob > 0.0) || !(prob < 1.0)) {
    throw DomainError("chisq_quantile: probability must be in (0,1)");
  }
  double lo = 0.0;
  double hi = df + 10.0 * std::sqrt(2.0 * df) + 10.0;
  while (chisq_cdf(hi, df) < prob) {
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-10; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chisq_cdf(mid, df) < prob) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void HypothesisSpec::validate(Index assoc_dim) const {
  if (q.rows() < 1 || q.cols() != assoc_dim) {
    std::ostringstream msg;
    msg << "hypothesis matrix must be q x " << assoc_dim << " with q >= 1, got "
        << q.rows() << "x" << q.cols();
    throw DomainError(msg.str());
  }
  if (numerical_rank(q) < q.rows()) {
    throw DomainError("hypothesis matrix must have full row rank");
  }
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw DomainError("significance level must be in (0,1)");
  }
}

void PowerRequest::validate(const ModelMatrices& mm) const {
  if (scheme == Scheme::P) {
    throw DomainError("power analysis supports schemes M, MR and MC");
  }
  if (theta_prime.rows() != mm.Lx || theta_prime.cols() != mm.Ly) {
    throw DomainError("alternative association parameter has the wrong shape "
                      "for this design");
  }
  auto check_simplex = [](const Vector& v, Index len, const char* what) {
    if (v.size() != len)
      throw DomainError(std::string(what) + " has the wrong length");
    if (!(v.minCoeff() > 0.0))
      throw DomainError(std::string(what) + " must be strictly positive");
    if (std::abs(v.sum() - 1.0) > 1e-8)
      throw DomainError(std::string(what) + " must sum to 1");
  };
  check_simplex(row_marg, mm.J + 1, "row marginal");
  check_simplex(col_marg, mm.K + 1, "column marginal");
  if (scheme == Scheme::MR)
    check_simplex(proportions, mm.J + 1, "row sampling proportions");
  if (scheme == Scheme::MC)
    check_simplex(proportions, mm.K + 1, "column sampling proportions");
}

Alternative build_alternative(const PowerRequest& req, const ModelMatrices& mm,
                              const DesignSpec& spec) {
  req.validate(mm);
  if (!(req.n > 0.0)) {
    throw DomainError("build_alternative: total sample size must be positive");
  }
  Alternative out;
  out.p_prime = ipf_constrained(req.theta_prime, req.row_marg, req.col_marg, mm);

  out.sampling_density = out.p_prime;
  if (req.scheme == Scheme::MR) {
    const Vector rt = out.p_prime.row_totals();
    out.sampling_density.cells =
        out.p_prime.cells.array().colwise() *
        (req.proportions.array() / rt.array());
  } else if (req.scheme == Scheme::MC) {
    const Vector ct = out.p_prime.col_totals();
    out.sampling_density.cells =
        out.p_prime.cells.array().rowwise() *
        (req.proportions.array() / ct.array()).transpose();
  }

  ContingencyTable mu(req.n * out.sampling_density.cells, TableKind::Expected);
  out.theta_cov = theta_cov_factored(mu, spec);
  return out;
}

namespace {

double noncentrality_at(const PowerRequest& req, const HypothesisSpec& hyp,
                        const ModelMatrices& mm, const DesignSpec& spec) {
  const Alternative alt = build_alternative(req, mm, spec);
  const Vector qt = hyp.q * vec(req.theta_prime);
  if (qt.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Matrix qsq = hyp.q * alt.theta_cov * hyp.q.transpose();
  Eigen::LLT<Matrix> llt(qsq);
  if (llt.info() != Eigen::Success) {
    throw SingularError(
        "power: Q Sigma Q^T is singular under the alternative");
  }
  return qt.dot(llt.solve(qt));
}

}  // namespace

double power_at(const PowerRequest& req, const HypothesisSpec& hyp,
                const ModelMatrices& mm, const DesignSpec& spec) {
  hyp.validate(mm.assoc_dim());
  const double delta = noncentrality_at(req, hyp, mm, spec);
  if (delta == 0.0) return hyp.alpha;
  const int df = static_cast<int>(hyp.dof());
  const double critical = chisq_quantile(1.0 - hyp.alpha, df);
  return 1.0 - noncentral_chisq_cdf(critical, df, delta);
}

long required_sample_size(const PowerRequest& req, const HypothesisSpec& hyp,
                          const ModelMatrices& mm, const DesignSpec& spec) {
  hyp.validate(mm.assoc_dim());
  if (!(req.target_power > hyp.alpha) || !(req.target_power < 1.0)) {
    throw DomainError("target power must lie in (alpha, 1)");
  }
  const Vector qt = hyp.q * vec(req.theta_prime);
  if (qt.cwiseAbs().maxCoeff() == 0.0) {
    throw DomainError("required_sample_size: Q theta' = 0, the target power "
                      "is unreachable");
  }

  PowerRequest unit = req;
  unit.n = 1.0;
  const double delta_per_n = noncentrality_at(unit, hyp, mm, spec);

  const int df = static_cast<int>(hyp.dof());
  const double critical = chisq_quantile(1.0 - hyp.alpha, df);
  auto power_of_delta = [&](double delta) {
    return 1.0 - noncentral_chisq_cdf(critical, df, delta);
  };

  // Critical noncentrality by bisection; power is increasing in delta.
  double lo = 0.0;
  double hi = 1.0;
  while (power_of_delta(hi) < req.target_power && hi < 1e10) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (power_of_delta(mid) < req.target_power) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double delta_star = 0.5 * (lo + hi);

  long n = std::max<long>(1, static_cast<long>(std::ceil(delta_star / delta_per_n - 1e-9)));
  auto power_at_n = [&](long m) {
    PowerRequest r = req;
    r.n = static_cast<double>(m);
    return power_at(r, hyp, mm, spec);
  };
  while (n > 1 && power_at_n(n - 1) >= req.target_power) --n;
  while (power_at_n(n) < req.target_power) ++n;
  return n;
}

WaldResult wald_test(const Vector& theta_hat, const Matrix& theta_cov,
                     const HypothesisSpec& hyp) {
  hyp.validate(theta_hat.size());
  if (theta_cov.rows() != theta_hat.size() ||
      theta_cov.cols() != theta_hat.size()) {
    throw DomainError("wald_test: covariance dimensions do not match");
  }
  const Vector qt = hyp.q * theta_hat;
  Matrix qsq = hyp.q * theta_cov * hyp.q.transpose();
  Eigen::LLT<Matrix> llt(qsq);
  if (llt.info() != Eigen::Success) {
    throw SingularError("wald_test: Q Sigma Q^T is singular");
  }
  WaldResult out;
  out.df = hyp.dof();
  out.statistic = qt.dot(llt.solve(qt));
  out.p_value = 1.0 - chisq_cdf(out.statistic, static_cast<int>(out.df));
  return out;
}

namespace {

void enumerate_compositions(int total, int parts, std::vector<int>& current,
                            const std::function<void(const std::vector<int>&)>& visit) {
  if (parts == 1) {
    if (total >= 1) {
      current.push_back(total);
      visit(current);
      current.pop_back();
    }
    return;
  }
  for (int first = 1; first + (parts - 1) <= total; ++first) {
    current.push_back(first);
    enumerate_compositions(total - first, parts - 1, current, visit);
    current.pop_back();
  }
}

}  // namespace

ProportionSearchResult optimal_proportions(const PowerRequest& req,
                                           const HypothesisSpec& hyp,
                                           const ModelMatrices& mm,
                                           const DesignSpec& spec,
                                           int resolution) {
  if (req.scheme != Scheme::MR && req.scheme != Scheme::MC) {
    throw DomainError("optimal_proportions applies to schemes MR and MC");
  }
  const int parts = static_cast<int>(req.scheme == Scheme::MR ? mm.J + 1
                                                              : mm.K + 1);
  if (resolution < parts) {
    throw DomainError("resolution must allow one grid step per part");
  }
  ProportionSearchResult best;
  best.power = -1.0;
  std::vector<int> current;
  enumerate_compositions(
      resolution, parts, current, [&](const std::vector<int>& comp) {
        Vector props(parts);
        for (int i = 0; i < parts; ++i)
          props(i) = static_cast<double>(comp[static_cast<std::size_t>(i)]) /
                     static_cast<double>(resolution);
        PowerRequest r = req;
        r.proportions = props;
        const double p = power_at(r, hyp, mm, spec);
        // Strict improvement keeps the lexicographically first tie-holder.
        if (p > best.power) {
          best.power = p;
          best.proportions = props;
        }
      });
  return best;
}

}  // namespace lbor
