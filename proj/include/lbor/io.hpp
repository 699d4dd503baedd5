#pragma once

#include "lbor/asycov.hpp"
#include "lbor/design.hpp"
#include "lbor/fit.hpp"
#include "lbor/power.hpp"
#include "lbor/simulate.hpp"

#include <iosfwd>
#include <string>

namespace lbor::io {

// File parse problems (missing field, malformed value, wrong version).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Table CSV: first row holds column labels behind an empty lead cell, each
// following row starts with its row label; the first data row/column is the
// reference level.
ContingencyTable read_table_csv(std::istream& in);
ContingencyTable read_table_csv_file(const std::string& path);
void write_table_csv(std::ostream& out, const ContingencyTable& table);

DesignSpec read_design_json(std::istream& in);
DesignSpec read_design_json_file(const std::string& path);

HypothesisSpec read_hypothesis_json(std::istream& in);
HypothesisSpec read_hypothesis_json_file(const std::string& path);

// {"version":1,"row":[...],"col":[...]}
struct Marginals {
  Vector row;
  Vector col;
};
Marginals read_marginals_json(std::istream& in);
Marginals read_marginals_json_file(const std::string& path);

// {"version":1,"theta":[[...]]}
Matrix read_theta_json(std::istream& in);
Matrix read_theta_json_file(const std::string& path);

SimulationConfig read_simulation_json(std::istream& in);
SimulationConfig read_simulation_json_file(const std::string& path);

// Doubles in every emitted document are rounded to 12 significant digits so
// output is byte-stable across runs.
double round_significant(double x, int digits = 12);

enum class OutputFormat { Json, Csv };
OutputFormat format_from_name(const std::string& name);

void write_fit_result(std::ostream& out, const FitResult& fit,
                      const Matrix& theta_cov, OutputFormat format);
void write_bundle(std::ostream& out, const CovarianceBundle& bundle,
                  OutputFormat format);
void write_theta_cov(std::ostream& out, const Matrix& theta_cov,
                     const SchemeSpec& scheme, OutputFormat format);

struct PowerOutput {
  std::string command;  // "power" or "samplesize"
  Scheme scheme = Scheme::M;
  double alpha = 0.0;
  Index df = 0;
  double n = 0.0;
  double noncentrality = 0.0;
  double critical_value = 0.0;
  double power = 0.0;
  long required_n = 0;          // samplesize only
  double power_at_required = 0; // samplesize only
  ContingencyTable p_prime;
  ContingencyTable sampling_density;
  Matrix theta_cov_alternative;
};
void write_power_output(std::ostream& out, const PowerOutput& result,
                        OutputFormat format);

void write_monte_carlo_report(std::ostream& out, const MonteCarloReport& rep,
                              const SimulationConfig& config,
                              OutputFormat format);
void write_theta_draws_csv(std::ostream& out, const Matrix& draws);

struct BridgeOutput {
  std::string direction;
  Matrix result;
};
void write_bridge_output(std::ostream& out, const BridgeOutput& result,
                         OutputFormat format);

struct CheckOutput {
  IdentifiabilityReport identifiability;
  bool table_ok = false;
  std::string table_message;
  bool pass = false;
};
void write_check_output(std::ostream& out, const CheckOutput& result,
                        OutputFormat format);

void write_error(std::ostream& out, const std::string& kind,
                 const std::string& message, OutputFormat format);

}  // namespace lbor::io
