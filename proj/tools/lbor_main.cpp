#include "lbor/asycov.hpp"
#include "lbor/bridge.hpp"
#include "lbor/design.hpp"
#include "lbor/fit.hpp"
#include "lbor/io.hpp"
#include "lbor/matkit.hpp"
#include "lbor/power.hpp"
#include "lbor/simulate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

using lbor::io::OutputFormat;

struct CommonArgs {
  std::string format = "json";
  std::string out_path;
  double tol = 0.0;  // 0 keeps module defaults
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--format", args->format, "Output format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--out", args->out_path,
                  "Output file (default: standard output; relative paths "
                  "resolve against $LBOR_OUT_DIR when set)");
  cmd->add_option("--tol", args->tol,
                  "Override the convergence tolerances of the fit");
}

std::string resolve_out_path(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* dir = std::getenv("LBOR_OUT_DIR");
  if (!dir || !*dir) return path;
  std::string full(dir);
  if (full.back() != '/') full += '/';
  return full + path;
}

// Streams the result to --out or stdout.
template <typename Writer>
void deliver(const CommonArgs& args, Writer&& writer) {
  if (args.out_path.empty()) {
    writer(std::cout);
    return;
  }
  const std::string path = resolve_out_path(args.out_path);
  std::ofstream out(path);
  if (!out) throw lbor::io::ParseError("cannot write to '" + path + "'");
  writer(out);
}

lbor::FitOptions fit_options(const CommonArgs& args) {
  lbor::FitOptions opts;
  if (args.tol > 0.0) {
    opts.gradient_tol = args.tol;
    opts.eta_tol = args.tol;
  }
  return opts;
}

// Moves the named reference row/column to the front of the table.
void apply_reference(lbor::ContingencyTable& table, const std::string& spec) {
  const auto comma = spec.find(',');
  if (comma == std::string::npos) {
    throw lbor::DomainError(
        "--reference expects 'ROW_LABEL,COL_LABEL'");
  }
  const std::string row = spec.substr(0, comma);
  const std::string col = spec.substr(comma + 1);
  auto find_label = [](const std::vector<std::string>& labels,
                       const std::string& want, const char* what) {
    const auto it = std::find(labels.begin(), labels.end(), want);
    if (it == labels.end()) {
      throw lbor::DomainError(std::string("--reference: no ") + what +
                              " labelled '" + want + "'");
    }
    return static_cast<lbor::Index>(it - labels.begin());
  };
  const lbor::Index rj = find_label(table.row_labels, row, "row");
  const lbor::Index ck = find_label(table.col_labels, col, "column");
  if (rj != 0) {
    table.cells.row(0).swap(table.cells.row(rj));
    std::swap(table.row_labels[0], table.row_labels[static_cast<std::size_t>(rj)]);
  }
  if (ck != 0) {
    table.cells.col(0).swap(table.cells.col(ck));
    std::swap(table.col_labels[0], table.col_labels[static_cast<std::size_t>(ck)]);
  }
}

lbor::SchemeSpec scheme_for_table(lbor::Scheme scheme,
                                  const lbor::ContingencyTable& table) {
  switch (scheme) {
    case lbor::Scheme::M:
      return lbor::SchemeSpec::multinomial(table.total());
    case lbor::Scheme::P:
      return lbor::SchemeSpec::poisson(table.total());
    case lbor::Scheme::MR:
      return lbor::SchemeSpec::rows(table.row_totals());
    case lbor::Scheme::MC:
      return lbor::SchemeSpec::cols(table.col_totals());
  }
  return lbor::SchemeSpec::multinomial(table.total());
}

struct PowerArgs {
  std::string design_path, theta_path, marginals_path, q_path;
  std::string scheme = "M";
  std::vector<double> proportions;
  double alpha = 0.05;
  double n = 0.0;
  double target_power = 0.0;
};

lbor::PowerRequest make_power_request(const PowerArgs& args,
                                      const lbor::ModelMatrices& mm) {
  lbor::PowerRequest req;
  req.theta_prime = lbor::io::read_theta_json_file(args.theta_path);
  const auto marg = lbor::io::read_marginals_json_file(args.marginals_path);
  req.row_marg = marg.row;
  req.col_marg = marg.col;
  req.scheme = lbor::scheme_from_name(args.scheme);
  if (!args.proportions.empty()) {
    req.proportions = Eigen::Map<const lbor::Vector>(
        args.proportions.data(), static_cast<lbor::Index>(args.proportions.size()));
  } else if (req.scheme == lbor::Scheme::MR) {
    req.proportions = lbor::Vector::Constant(mm.J + 1, 1.0 / double(mm.J + 1));
  } else if (req.scheme == lbor::Scheme::MC) {
    req.proportions = lbor::Vector::Constant(mm.K + 1, 1.0 / double(mm.K + 1));
  }
  req.n = args.n;
  req.target_power = args.target_power;
  return req;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Log-bilinear odds-ratio models for contingency tables: "
               "fitting, asymptotic covariances, power and sample size"};
  app.require_subcommand(1);

  CommonArgs common;

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit the association model");
  std::string table_path, design_path, reference;
  fit_cmd->add_option("--table", table_path, "Table CSV")->required();
  fit_cmd->add_option("--design", design_path, "Design JSON")->required();
  fit_cmd->add_option("--reference", reference,
                      "Use 'ROW_LABEL,COL_LABEL' as the reference cell");
  add_common(fit_cmd, &common);

  // cov
  auto* cov_cmd = app.add_subcommand(
      "cov", "Asymptotic covariance of the association estimate");
  bool all_representations = false;
  std::string cov_scheme = "M";
  cov_cmd->add_option("--table", table_path, "Table CSV")->required();
  cov_cmd->add_option("--design", design_path, "Design JSON")->required();
  cov_cmd->add_option("--scheme", cov_scheme, "Sampling scheme tag")
      ->check(CLI::IsMember({"M", "P", "MR", "MC"}));
  cov_cmd->add_flag("--all-representations", all_representations,
                    "Emit every representation and their worst deviation");
  cov_cmd->add_option("--reference", reference,
                      "Use 'ROW_LABEL,COL_LABEL' as the reference cell");
  add_common(cov_cmd, &common);

  // power / samplesize
  PowerArgs power_args;
  auto* power_cmd =
      app.add_subcommand("power", "Asymptotic power of a linear hypothesis test");
  power_cmd->add_option("--design", power_args.design_path, "Design JSON")->required();
  power_cmd->add_option("--theta-prime", power_args.theta_path,
                        "Alternative association parameter JSON")->required();
  power_cmd->add_option("--marginals", power_args.marginals_path,
                        "Target marginals JSON")->required();
  power_cmd->add_option("--scheme", power_args.scheme, "M, MR or MC")
      ->check(CLI::IsMember({"M", "MR", "MC"}));
  power_cmd->add_option("--proportions", power_args.proportions,
                        "Sampling proportions for MR/MC (default balanced)");
  power_cmd->add_option("--q", power_args.q_path, "Hypothesis JSON")->required();
  power_cmd->add_option("--alpha", power_args.alpha, "Significance level");
  power_cmd->add_option("--n", power_args.n, "Total sample size")->required();
  add_common(power_cmd, &common);

  auto* size_cmd = app.add_subcommand(
      "samplesize", "Smallest n reaching a target power");
  size_cmd->add_option("--design", power_args.design_path, "Design JSON")->required();
  size_cmd->add_option("--theta-prime", power_args.theta_path,
                       "Alternative association parameter JSON")->required();
  size_cmd->add_option("--marginals", power_args.marginals_path,
                       "Target marginals JSON")->required();
  size_cmd->add_option("--scheme", power_args.scheme, "M, MR or MC")
      ->check(CLI::IsMember({"M", "MR", "MC"}));
  size_cmd->add_option("--proportions", power_args.proportions,
                       "Sampling proportions for MR/MC (default balanced)");
  size_cmd->add_option("--q", power_args.q_path, "Hypothesis JSON")->required();
  size_cmd->add_option("--alpha", power_args.alpha, "Significance level");
  size_cmd->add_option("--target-power", power_args.target_power,
                       "Power to reach")->required();
  add_common(size_cmd, &common);

  // simulate
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Monte Carlo check of the asymptotic covariance");
  std::string sim_config_path, dump_path;
  std::optional<std::uint64_t> seed_override;
  int threads = 0;
  sim_cmd->add_option("--config", sim_config_path, "Simulation JSON")->required();
  sim_cmd->add_option("--design", design_path, "Design JSON")->required();
  sim_cmd->add_option("--seed", seed_override, "Override the config seed");
  sim_cmd->add_option("--threads", threads, "Worker threads (0 = auto)");
  sim_cmd->add_option("--dump-thetas", dump_path,
                      "Write per-replicate estimates to this CSV");
  add_common(sim_cmd, &common);

  // bridge
  auto* bridge_cmd = app.add_subcommand(
      "bridge", "Convert between regression and association parameters");
  std::string direction;
  std::vector<double> beta_arg, theta_arg;
  double sigma_y2 = 1.0;
  std::string cov_x_path, cov_y_path;
  bridge_cmd->add_option("--direction", direction,
                         "theta-from-beta | beta-from-theta | "
                         "theta-from-beta-mv | beta-from-theta-loglinear")
      ->required()
      ->check(CLI::IsMember({"theta-from-beta", "beta-from-theta",
                             "theta-from-beta-mv", "beta-from-theta-loglinear"}));
  std::string beta_file;
  bridge_cmd->add_option("--beta", beta_arg, "Regression coefficients");
  bridge_cmd->add_option("--beta-file", beta_file,
                         "Regression coefficient matrix (theta JSON schema)");
  bridge_cmd->add_option("--theta", theta_arg, "Association coefficients");
  bridge_cmd->add_option("--sigma-y2", sigma_y2, "Marginal response variance");
  bridge_cmd->add_option("--cov-x", cov_x_path,
                         "Covariate covariance (theta JSON schema)");
  bridge_cmd->add_option("--cov-y", cov_y_path,
                         "Response covariance (theta JSON schema)");
  add_common(bridge_cmd, &common);

  // check
  auto* check_cmd = app.add_subcommand("check", "Validate inputs, no estimation");
  check_cmd->add_option("--table", table_path, "Table CSV")->required();
  check_cmd->add_option("--design", design_path, "Design JSON")->required();
  check_cmd->add_option("--reference", reference,
                        "Use 'ROW_LABEL,COL_LABEL' as the reference cell");
  add_common(check_cmd, &common);

  CLI11_PARSE(app, argc, argv);

  OutputFormat format = OutputFormat::Json;
  int exit_code = 0;
  try {
    format = lbor::io::format_from_name(common.format);

    if (*fit_cmd) {
      auto table = lbor::io::read_table_csv_file(table_path);
      if (!reference.empty()) apply_reference(table, reference);
      const auto design = lbor::io::read_design_json_file(design_path);
      const auto mm = lbor::build_model_matrices(design);
      const auto fit = lbor::fit_loglinear(table, mm, fit_options(common));
      const auto cov = lbor::theta_cov_projection(fit.mu_hat, mm);
      deliver(common, [&](std::ostream& out) {
        lbor::io::write_fit_result(out, fit, cov, format);
      });
    } else if (*cov_cmd) {
      auto table = lbor::io::read_table_csv_file(table_path);
      if (!reference.empty()) apply_reference(table, reference);
      const auto design = lbor::io::read_design_json_file(design_path);
      const auto mm = lbor::build_model_matrices(design);
      const auto fit = lbor::fit_loglinear(table, mm, fit_options(common));
      const auto scheme_spec =
          scheme_for_table(lbor::scheme_from_name(cov_scheme), table);
      if (all_representations) {
        const auto bundle =
            lbor::covariance_bundle(fit, mm, design, scheme_spec);
        deliver(common, [&](std::ostream& out) {
          lbor::io::write_bundle(out, bundle, format);
        });
      } else {
        const auto cov = lbor::theta_cov_projection(fit.mu_hat, mm);
        deliver(common, [&](std::ostream& out) {
          lbor::io::write_theta_cov(out, cov, scheme_spec, format);
        });
      }
    } else if (*power_cmd || *size_cmd) {
      const auto design = lbor::io::read_design_json_file(power_args.design_path);
      const auto mm = lbor::build_model_matrices(design);
      auto req = make_power_request(power_args, mm);
      lbor::HypothesisSpec hyp =
          lbor::io::read_hypothesis_json_file(power_args.q_path);
      hyp.alpha = power_args.alpha;

      lbor::io::PowerOutput result;
      result.scheme = req.scheme;
      result.alpha = hyp.alpha;
      result.df = hyp.dof();
      if (*size_cmd) {
        result.command = "samplesize";
        result.required_n = lbor::required_sample_size(req, hyp, mm, design);
        req.n = static_cast<double>(result.required_n);
        result.power_at_required = lbor::power_at(req, hyp, mm, design);
        result.power = result.power_at_required;
      } else {
        result.command = "power";
        result.n = req.n;
        result.power = lbor::power_at(req, hyp, mm, design);
      }
      const auto alt = lbor::build_alternative(req, mm, design);
      result.p_prime = alt.p_prime;
      result.sampling_density = alt.sampling_density;
      result.theta_cov_alternative = alt.theta_cov;
      result.critical_value =
          lbor::chisq_quantile(1.0 - hyp.alpha, static_cast<int>(hyp.dof()));
      const lbor::Vector qt = hyp.q * lbor::vec(req.theta_prime);
      if (qt.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::LLT<lbor::Matrix> llt(hyp.q * alt.theta_cov * hyp.q.transpose());
        result.noncentrality = qt.dot(llt.solve(qt));
      }
      deliver(common, [&](std::ostream& out) {
        lbor::io::write_power_output(out, result, format);
      });
    } else if (*sim_cmd) {
      auto config = lbor::io::read_simulation_json_file(sim_config_path);
      if (seed_override) config.seed = *seed_override;
      const auto design = lbor::io::read_design_json_file(design_path);
      const auto mm = lbor::build_model_matrices(design);
      const bool keep = !dump_path.empty();
      const auto report = lbor::monte_carlo_cov(config, mm, design, threads, keep);
      if (keep) {
        std::ofstream dump(resolve_out_path(dump_path));
        if (!dump) {
          throw lbor::io::ParseError("cannot write to '" + dump_path + "'");
        }
        lbor::io::write_theta_draws_csv(dump, report.theta_draws);
      }
      deliver(common, [&](std::ostream& out) {
        lbor::io::write_monte_carlo_report(out, report, config, format);
      });
    } else if (*bridge_cmd) {
      auto to_vector = [](const std::vector<double>& v) {
        return Eigen::Map<const lbor::Vector>(
            v.data(), static_cast<lbor::Index>(v.size()));
      };
      lbor::io::BridgeOutput result;
      result.direction = direction;
      if (direction == "theta-from-beta") {
        lbor::LinearBridgeInput in;
        in.beta = to_vector(beta_arg);
        in.sigma_y2 = sigma_y2;
        in.cov_x = cov_x_path.empty()
                       ? lbor::Matrix::Identity(in.beta.size(), in.beta.size())
                       : lbor::io::read_theta_json_file(cov_x_path);
        result.result = lbor::theta_from_beta_linear(in);
      } else if (direction == "beta-from-theta") {
        const lbor::Vector theta = to_vector(theta_arg);
        const lbor::Matrix cov_x =
            cov_x_path.empty()
                ? lbor::Matrix::Identity(theta.size(), theta.size())
                : lbor::io::read_theta_json_file(cov_x_path);
        result.result = lbor::beta_from_theta_linear(theta, sigma_y2, cov_x);
      } else if (direction == "theta-from-beta-mv") {
        if (beta_file.empty() || cov_x_path.empty() || cov_y_path.empty()) {
          throw lbor::DomainError(
              "theta-from-beta-mv needs --beta-file, --cov-x and --cov-y");
        }
        const lbor::Matrix beta = lbor::io::read_theta_json_file(beta_file);
        const lbor::Matrix cov_x = lbor::io::read_theta_json_file(cov_x_path);
        const lbor::Matrix cov_y = lbor::io::read_theta_json_file(cov_y_path);
        result.result = lbor::theta_from_beta_mvlinear(beta, cov_y, cov_x);
      } else {
        result.result = lbor::beta_from_theta_loglinear(to_vector(theta_arg));
      }
      deliver(common, [&](std::ostream& out) {
        lbor::io::write_bridge_output(out, result, format);
      });
    } else if (*check_cmd) {
      lbor::io::CheckOutput result;
      auto table = lbor::io::read_table_csv_file(table_path);
      if (!reference.empty()) apply_reference(table, reference);
      const auto design = lbor::io::read_design_json_file(design_path);
      try {
        table.validate();
        result.table_ok = true;
        result.table_message = "ok";
      } catch (const lbor::DomainError& err) {
        result.table_ok = false;
        result.table_message = err.what();
      }
      result.identifiability = lbor::check_identifiability(design, table);
      result.pass = result.table_ok && result.identifiability.pass;
      deliver(common, [&](std::ostream& out) {
        lbor::io::write_check_output(out, result, format);
      });
      exit_code = result.pass ? 0 : 1;
    }
  } catch (const lbor::io::ParseError& err) {
    lbor::io::write_error(std::cerr, "parse", err.what(), format);
    return 2;
  } catch (const lbor::DomainError& err) {
    lbor::io::write_error(std::cerr, "domain", err.what(), format);
    return 1;
  } catch (const lbor::IdentifiabilityError& err) {
    lbor::io::write_error(std::cerr, "identifiability", err.what(), format);
    return 1;
  } catch (const lbor::ConvergenceError& err) {
    lbor::io::write_error(std::cerr, "convergence", err.what(), format);
    return 1;
  } catch (const lbor::SingularError& err) {
    lbor::io::write_error(std::cerr, "singular", err.what(), format);
    return 1;
  }
  return exit_code;
}
