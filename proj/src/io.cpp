#include "lbor/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace lbor::io {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ParseError(context + ": '" + s + "' is not a number");
  }
  return v;
}

std::ifstream open_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

ordered_json parse_json(std::istream& in, const char* what) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(std::string(what) + ": " + err.what());
  }
  return j;
}

void require_version(const ordered_json& j, const char* what) {
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != 1) {
    throw ParseError(std::string(what) +
                     ": missing or unsupported \"version\" (expected 1)");
  }
}

Matrix matrix_from_json(const ordered_json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(context + ": expected a nonempty array of rows");
  }
  const std::size_t rows = j.size();
  if (!j[0].is_array()) throw ParseError(context + ": rows must be arrays");
  const std::size_t cols = j[0].size();
  Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ParseError(context + ": ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw ParseError(context + ": non-numeric entry");
      out(static_cast<Index>(i), static_cast<Index>(c)) = j[i][c].get<double>();
    }
  }
  return out;
}

Vector vector_from_json(const ordered_json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(context + ": expected a nonempty numeric array");
  }
  Vector out(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(context + ": non-numeric entry");
    out(static_cast<Index>(i)) = j[i].get<double>();
  }
  return out;
}

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(round_significant(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_to_json(const Vector& v) {
  ordered_json out = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(round_significant(v(i)));
  return out;
}

void emit(std::ostream& out, const ordered_json& j) { out << j.dump(2) << "\n"; }

void csv_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  char buf[40];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", m(i, j));
      out << name << "," << i << "," << j << "," << buf << "\n";
    }
  }
}

void csv_vector(std::ostream& out, const std::string& name, const Vector& v) {
  char buf[40];
  for (Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g", v(i));
    out << name << "," << i << ",," << buf << "\n";
  }
}

void csv_scalar(std::ostream& out, const std::string& name, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  out << name << ",,," << buf << "\n";
}

const char* kCsvHeader = "field,i,j,value\n";

}  // namespace

double round_significant(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

OutputFormat format_from_name(const std::string& name) {
  if (name == "json") return OutputFormat::Json;
  if (name == "csv") return OutputFormat::Csv;
  throw ParseError("unknown output format '" + name + "'");
}

ContingencyTable read_table_csv(std::istream& in) {
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    lines.push_back(split_csv_line(line));
  }
  if (lines.size() < 3) {
    throw ParseError("table CSV needs a label row and at least two data rows");
  }
  const std::size_t cols = lines[0].size();
  if (cols < 3) {
    throw ParseError("table CSV needs at least two data columns");
  }
  ContingencyTable table;
  table.col_labels.assign(lines[0].begin() + 1, lines[0].end());
  table.cells.resize(static_cast<Index>(lines.size() - 1),
                     static_cast<Index>(cols - 1));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].size() != cols) {
      throw ParseError("table CSV row " + std::to_string(r) +
                       " has the wrong number of fields");
    }
    table.row_labels.push_back(lines[r][0]);
    for (std::size_t c = 1; c < cols; ++c) {
      table.cells(static_cast<Index>(r - 1), static_cast<Index>(c - 1)) =
          parse_double(lines[r][c], "table cell");
    }
  }
  // cell-value validation is the consumer's call; `check` wants to report it
  return table;
}

ContingencyTable read_table_csv_file(const std::string& path) {
  auto in = open_file(path);
  return read_table_csv(in);
}

void write_table_csv(std::ostream& out, const ContingencyTable& table) {
  const Index rows = table.cells.rows();
  const Index cols = table.cells.cols();
  for (Index k = 0; k < cols; ++k) {
    out << ",";
    if (static_cast<std::size_t>(k) < table.col_labels.size()) {
      out << table.col_labels[static_cast<std::size_t>(k)];
    } else {
      out << "y" << k;
    }
  }
  out << "\n";
  char buf[40];
  for (Index j = 0; j < rows; ++j) {
    if (static_cast<std::size_t>(j) < table.row_labels.size()) {
      out << table.row_labels[static_cast<std::size_t>(j)];
    } else {
      out << "x" << j;
    }
    for (Index k = 0; k < cols; ++k) {
      std::snprintf(buf, sizeof buf, "%.12g", table.cells(j, k));
      out << "," << buf;
    }
    out << "\n";
  }
}

DesignSpec read_design_json(std::istream& in) {
  ordered_json j = parse_json(in, "design");
  require_version(j, "design");
  if (!j.contains("xtilde") || !j.contains("ytilde")) {
    throw ParseError("design: needs \"xtilde\" and \"ytilde\"");
  }
  return DesignSpec(matrix_from_json(j["xtilde"], "design.xtilde"),
                    matrix_from_json(j["ytilde"], "design.ytilde"));
}

DesignSpec read_design_json_file(const std::string& path) {
  auto in = open_file(path);
  return read_design_json(in);
}

HypothesisSpec read_hypothesis_json(std::istream& in) {
  ordered_json j = parse_json(in, "hypothesis");
  require_version(j, "hypothesis");
  if (!j.contains("Q")) throw ParseError("hypothesis: needs \"Q\"");
  HypothesisSpec hyp;
  hyp.q = matrix_from_json(j["Q"], "hypothesis.Q");
  hyp.alpha = j.value("alpha", 0.05);
  return hyp;
}

HypothesisSpec read_hypothesis_json_file(const std::string& path) {
  auto in = open_file(path);
  return read_hypothesis_json(in);
}

Marginals read_marginals_json(std::istream& in) {
  ordered_json j = parse_json(in, "marginals");
  require_version(j, "marginals");
  if (!j.contains("row") || !j.contains("col")) {
    throw ParseError("marginals: needs \"row\" and \"col\"");
  }
  return {vector_from_json(j["row"], "marginals.row"),
          vector_from_json(j["col"], "marginals.col")};
}

Marginals read_marginals_json_file(const std::string& path) {
  auto in = open_file(path);
  return read_marginals_json(in);
}

Matrix read_theta_json(std::istream& in) {
  ordered_json j = parse_json(in, "theta");
  require_version(j, "theta");
  if (!j.contains("theta")) throw ParseError("theta: needs \"theta\"");
  return matrix_from_json(j["theta"], "theta.theta");
}

Matrix read_theta_json_file(const std::string& path) {
  auto in = open_file(path);
  return read_theta_json(in);
}

SimulationConfig read_simulation_json(std::istream& in) {
  ordered_json j = parse_json(in, "simulation");
  require_version(j, "simulation");
  SimulationConfig config;
  if (!j.contains("p")) throw ParseError("simulation: needs \"p\"");
  config.density =
      ContingencyTable(matrix_from_json(j["p"], "simulation.p"), TableKind::Expected);
  if (!j.contains("scheme") || !j["scheme"].is_object() ||
      !j["scheme"].contains("kind")) {
    throw ParseError("simulation: needs a \"scheme\" object with \"kind\"");
  }
  const auto& sj = j["scheme"];
  const Scheme kind = scheme_from_name(sj["kind"].get<std::string>());
  switch (kind) {
    case Scheme::M:
      if (!sj.contains("n")) throw ParseError("simulation scheme M: needs \"n\"");
      config.scheme = SchemeSpec::multinomial(sj["n"].get<double>());
      break;
    case Scheme::P:
      if (!sj.contains("nu")) throw ParseError("simulation scheme P: needs \"nu\"");
      config.scheme = SchemeSpec::poisson(sj["nu"].get<double>());
      break;
    case Scheme::MR:
      if (!sj.contains("row_sizes"))
        throw ParseError("simulation scheme MR: needs \"row_sizes\"");
      config.scheme = SchemeSpec::rows(
          vector_from_json(sj["row_sizes"], "scheme.row_sizes"));
      break;
    case Scheme::MC:
      if (!sj.contains("col_sizes"))
        throw ParseError("simulation scheme MC: needs \"col_sizes\"");
      config.scheme = SchemeSpec::cols(
          vector_from_json(sj["col_sizes"], "scheme.col_sizes"));
      break;
  }
  config.replications = j.value("replications", 1L);
  config.seed = j.value("seed", 0ULL);
  config.min_expected_cell = j.value("min_expected_cell", 5.0);
  return config;
}

SimulationConfig read_simulation_json_file(const std::string& path) {
  auto in = open_file(path);
  return read_simulation_json(in);
}

void write_fit_result(std::ostream& out, const FitResult& fit,
                      const Matrix& theta_cov, OutputFormat format) {
  if (format == OutputFormat::Json) {
    ordered_json j;
    j["schema_version"] = 1;
    j["command"] = "fit";
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["max_gradient"] = round_significant(fit.max_gradient);
    j["alpha_hat"] = round_significant(fit.alpha_hat);
    j["rho_hat"] = vector_to_json(fit.rho_hat);
    j["gamma_hat"] = vector_to_json(fit.gamma_hat);
    j["theta_hat"] = matrix_to_json(fit.theta_hat);
    j["theta_vec"] = vector_to_json(fit.theta_vec);
    j["theta_cov"] = matrix_to_json(theta_cov);
    Vector se = theta_cov.diagonal().cwiseSqrt();
    j["theta_se"] = vector_to_json(se);
    j["mu_hat"] = matrix_to_json(fit.mu_hat.cells);
    j["eta_hat"] = vector_to_json(fit.eta_hat);
    emit(out, j);
    return;
  }
  out << kCsvHeader;
  csv_scalar(out, "converged", fit.converged ? 1 : 0);
  csv_scalar(out, "iterations", fit.iterations);
  csv_scalar(out, "max_gradient", fit.max_gradient);
  csv_scalar(out, "alpha_hat", fit.alpha_hat);
  csv_vector(out, "rho_hat", fit.rho_hat);
  csv_vector(out, "gamma_hat", fit.gamma_hat);
  csv_matrix(out, "theta_hat", fit.theta_hat);
  csv_matrix(out, "theta_cov", theta_cov);
  csv_matrix(out, "mu_hat", fit.mu_hat.cells);
}

void write_theta_cov(std::ostream& out, const Matrix& theta_cov,
                     const SchemeSpec& scheme, OutputFormat format) {
  if (format == OutputFormat::Json) {
    ordered_json j;
    j["schema_version"] = 1;
    j["command"] = "cov";
    j["scheme"] = scheme_name(scheme.scheme);
    j["theta_cov"] = matrix_to_json(theta_cov);
    emit(out, j);
    return;
  }
  out << kCsvHeader;
  csv_matrix(out, "theta_cov", theta_cov);
}

void write_bundle(std::ostream& out, const CovarianceBundle& bundle,
                  OutputFormat format) {
  if (format == OutputFormat::Json) {
    ordered_json j;
    j["schema_version"] = 1;
    j["command"] = "cov";
    j["scheme"] = scheme_name(bundle.scheme_used_for_eta.scheme);
    ordered_json reps;
    reps["projection"] = matrix_to_json(bundle.projection);
    reps["explicit"] = matrix_to_json(bundle.explicit_form);
    reps["row_conditional"] = matrix_to_json(bundle.row_conditional);
    reps["factored"] = matrix_to_json(bundle.factored);
    reps["score"] = matrix_to_json(bundle.score_based);
    j["theta_cov"] = std::move(reps);
    j["max_pairwise_deviation"] = round_significant(bundle.max_pairwise_deviation);
    j["gamma_theta_cov"] = matrix_to_json(bundle.gamma_theta);
    j["eta_cov"] = matrix_to_json(bundle.eta_cov);
    j["mu_cov"] = matrix_to_json(bundle.mu_cov);
    j["warnings"] = bundle.warnings;
    emit(out, j);
    return;
  }
  out << kCsvHeader;
  csv_matrix(out, "projection", bundle.projection);
  csv_matrix(out, "explicit", bundle.explicit_form);
  csv_matrix(out, "row_conditional", bundle.row_conditional);
  csv_matrix(out, "factored", bundle.factored);
  csv_matrix(out, "score", bundle.score_based);
  csv_scalar(out, "max_pairwise_deviation", bundle.max_pairwise_deviation);
}

void write_power_output(std::ostream& out, const PowerOutput& result,
                        OutputFormat format) {
  if (format == OutputFormat::Json) {
    ordered_json j;
    j["schema_version"] = 1;
    j["command"] = result.command;
    j["scheme"] = scheme_name(result.scheme);
    j["alpha"] = round_significant(result.alpha);
    j["df"] = result.df;
    if (result.command == "samplesize") {
      j["required_n"] = result.required_n;
      j["power_at_required_n"] = round_significant(result.power_at_required);
    } else {
      j["n"] = round_significant(result.n);
    }
    j["noncentrality"] = round_significant(result.noncentrality);
    j["critical_value"] = round_significant(result.critical_value);
    j["power"] = round_significant(result.power);
    j["p_prime"] = matrix_to_json(result.p_prime.cells);
    j["sampling_density"] = matrix_to_json(result.sampling_density.cells);
    j["theta_cov_alternative"] = matrix_to_json(result.theta_cov_alternative);
    emit(out, j);
    return;
  }
  out << kCsvHeader;
  csv_scalar(out, "alpha", result.alpha);
  csv_scalar(out, "df", static_cast<double>(result.df));
  if (result.command == "samplesize") {
    csv_scalar(out, "required_n", static_cast<double>(result.required_n));
    csv_scalar(out, "power_at_required_n", result.power_at_required);
  } else {
    csv_scalar(out, "n", result.n);
  }
  csv_scalar(out, "noncentrality", result.noncentrality);
  csv_scalar(out, "critical_value", result.critical_value);
  csv_scalar(out, "power", result.power);
  csv_matrix(out, "p_prime", result.p_prime.cells);
}

void write_monte_carlo_report(std::ostream& out, const MonteCarloReport& rep,
                              const SimulationConfig& config,
                              OutputFormat format) {
  if (format == OutputFormat::Json) {
    ordered_json j;
    j["schema_version"] = 1;
    j["command"] = "simulate";
    j["scheme"] = scheme_name(config.scheme.scheme);
    j["replications"] = config.replications;
    j["seed"] = config.seed;
    j["n_success"] = rep.n_success;
    j["n_failed_fits"] = rep.n_failed_fits;
    j["theta_mean"] = vector_to_json(rep.theta_mean);
    j["empirical_defined"] = rep.empirical_defined;
    j["empirical_cov"] = matrix_to_json(rep.empirical_cov);
    j["asymptotic_cov"] = matrix_to_json(rep.asymptotic_cov);
    j["max_relative_error"] = round_significant(rep.max_relative_error);
    j["warnings"] = rep.warnings;
    emit(out, j);
    return;
  }
  out << kCsvHeader;
  csv_scalar(out, "n_success", static_cast<double>(rep.n_success));
  csv_scalar(out, "n_failed_fits", static_cast<double>(rep.n_failed_fits));
  csv_vector(out, "theta_mean", rep.theta_mean);
  csv_matrix(out, "empirical_cov", rep.empirical_cov);
  csv_matrix(out, "asymptotic_cov", rep.asymptotic_cov);
  csv_scalar(out, "max_relative_error", rep.max_relative_error);
}

void write_theta_draws_csv(std::ostream& out, const Matrix& draws) {
  out << "replicate";
  for (Index c = 0; c < draws.cols(); ++c) out << ",theta_" << c;
  out << "\n";
  char buf[40];
  for (Index r = 0; r < draws.rows(); ++r) {
    out << r;
    for (Index c = 0; c < draws.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.12g", draws(r, c));
      out << "," << buf;
    }
    out << "\n";
  }
}

void write_bridge_output(std::ostream& out, const BridgeOutput& result,
                         OutputFormat format) {
  if (format == OutputFormat::Json) {
    ordered_json j;
    j["schema_version"] = 1;
    j["command"] = "bridge";
    j["direction"] = result.direction;
    j["result"] = matrix_to_json(result.result);
    emit(out, j);
    return;
  }
  out << kCsvHeader;
  csv_matrix(out, "result", result.result);
}

void write_check_output(std::ostream& out, const CheckOutput& result,
                        OutputFormat format) {
  if (format == OutputFormat::Json) {
    ordered_json j;
    j["schema_version"] = 1;
    j["command"] = "check";
    j["pass"] = result.pass;
    j["table_ok"] = result.table_ok;
    j["table_message"] = result.table_message;
    ordered_json ident;
    ident["rank_xtilde"] = result.identifiability.rank_xtilde;
    ident["need_xtilde"] = result.identifiability.need_xtilde;
    ident["rank_ytilde"] = result.identifiability.rank_ytilde;
    ident["need_ytilde"] = result.identifiability.need_ytilde;
    ident["rank_interaction"] = result.identifiability.rank_interaction;
    ident["need_interaction"] = result.identifiability.need_interaction;
    ident["rank_model_basis"] = result.identifiability.rank_model_basis;
    ident["need_model_basis"] = result.identifiability.need_model_basis;
    ident["table_conforms"] = result.identifiability.table_conforms;
    ident["pass"] = result.identifiability.pass;
    j["identifiability"] = std::move(ident);
    emit(out, j);
    return;
  }
  out << kCsvHeader;
  csv_scalar(out, "pass", result.pass ? 1 : 0);
  csv_scalar(out, "table_ok", result.table_ok ? 1 : 0);
  csv_scalar(out, "identifiability_pass", result.identifiability.pass ? 1 : 0);
}

void write_error(std::ostream& out, const std::string& kind,
                 const std::string& message, OutputFormat format) {
  if (format == OutputFormat::Json) {
    ordered_json j;
    j["schema_version"] = 1;
    j["error"] = kind;
    j["message"] = message;
    emit(out, j);
    return;
  }
  out << "error," << kind << "," << message << "\n";
}

}  // namespace lbor::io
