#include "lbor/asycov.hpp"
#include "lbor/bridge.hpp"
#include "lbor/design.hpp"
#include "lbor/fit.hpp"
#include "lbor/matkit.hpp"
#include "lbor/power.hpp"
#include "lbor/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace lbor;

PYBIND11_MODULE(_lbor, m) {
  m.doc() = "Log-bilinear odds-ratio association models for contingency "
            "tables: fitting, asymptotic covariances, power and sample size.";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SingularError>(m, "SingularError", PyExc_ArithmeticError);
  py::register_exception<IdentifiabilityError>(m, "IdentifiabilityError",
                                               PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError",
                                           PyExc_RuntimeError);

  py::enum_<TableKind>(m, "TableKind")
      .value("OBSERVED_COUNTS", TableKind::ObservedCounts)
      .value("EXPECTED", TableKind::Expected);

  py::enum_<Scheme>(m, "Scheme")
      .value("M", Scheme::M)
      .value("P", Scheme::P)
      .value("MR", Scheme::MR)
      .value("MC", Scheme::MC);

  py::class_<ContingencyTable>(m, "ContingencyTable")
      .def(py::init<Matrix, TableKind>(), py::arg("cells"),
           py::arg("kind") = TableKind::ObservedCounts)
      .def_readwrite("cells", &ContingencyTable::cells)
      .def_readwrite("kind", &ContingencyTable::kind)
      .def_property_readonly("row_totals", &ContingencyTable::row_totals)
      .def_property_readonly("col_totals", &ContingencyTable::col_totals)
      .def_property_readonly("total", &ContingencyTable::total)
      .def("validate", &ContingencyTable::validate);

  py::class_<DesignSpec>(m, "DesignSpec")
      .def(py::init<Matrix, Matrix>(), py::arg("xtilde"), py::arg("ytilde"))
      .def_readwrite("xtilde", &DesignSpec::xtilde)
      .def_readwrite("ytilde", &DesignSpec::ytilde);

  py::class_<ModelMatrices>(m, "ModelMatrices")
      .def_readonly("J", &ModelMatrices::J)
      .def_readonly("K", &ModelMatrices::K)
      .def_readonly("interaction", &ModelMatrices::interaction)
      .def_readonly("interaction_core", &ModelMatrices::interaction_core)
      .def_readonly("contrast", &ModelMatrices::contrast)
      .def_readonly("col_offset", &ModelMatrices::col_offset)
      .def_readonly("col_indicator", &ModelMatrices::col_indicator)
      .def_readonly("row_indicator", &ModelMatrices::row_indicator)
      .def_readonly("model_basis", &ModelMatrices::model_basis);

  py::class_<SchemeSpec>(m, "SchemeSpec")
      .def_static("multinomial", &SchemeSpec::multinomial, py::arg("n"))
      .def_static("poisson", &SchemeSpec::poisson, py::arg("expected_total"))
      .def_static("rows", &SchemeSpec::rows, py::arg("per_row_sizes"))
      .def_static("cols", &SchemeSpec::cols, py::arg("per_col_sizes"))
      .def_readonly("scheme", &SchemeSpec::scheme);

  py::class_<IdentifiabilityReport>(m, "IdentifiabilityReport")
      .def_readonly("rank_xtilde", &IdentifiabilityReport::rank_xtilde)
      .def_readonly("rank_ytilde", &IdentifiabilityReport::rank_ytilde)
      .def_readonly("rank_interaction", &IdentifiabilityReport::rank_interaction)
      .def_readonly("rank_model_basis", &IdentifiabilityReport::rank_model_basis)
      .def_readonly("table_conforms", &IdentifiabilityReport::table_conforms)
      .def_readonly("pass_", &IdentifiabilityReport::pass);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("mu_hat", &FitResult::mu_hat)
      .def_readonly("eta_hat", &FitResult::eta_hat)
      .def_readonly("alpha_hat", &FitResult::alpha_hat)
      .def_readonly("rho_hat", &FitResult::rho_hat)
      .def_readonly("gamma_hat", &FitResult::gamma_hat)
      .def_readonly("theta_hat", &FitResult::theta_hat)
      .def_readonly("theta_vec", &FitResult::theta_vec)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("max_gradient", &FitResult::max_gradient);

  py::class_<CovarianceBundle>(m, "CovarianceBundle")
      .def_readonly("projection", &CovarianceBundle::projection)
      .def_readonly("explicit_form", &CovarianceBundle::explicit_form)
      .def_readonly("row_conditional", &CovarianceBundle::row_conditional)
      .def_readonly("factored", &CovarianceBundle::factored)
      .def_readonly("score_based", &CovarianceBundle::score_based)
      .def_readonly("gamma_theta", &CovarianceBundle::gamma_theta)
      .def_readonly("eta_cov", &CovarianceBundle::eta_cov)
      .def_readonly("mu_cov", &CovarianceBundle::mu_cov)
      .def_readonly("max_pairwise_deviation",
                    &CovarianceBundle::max_pairwise_deviation)
      .def_readonly("warnings", &CovarianceBundle::warnings);

  py::class_<SimulationConfig>(m, "SimulationConfig")
      .def(py::init([](const ContingencyTable& density, const SchemeSpec& scheme,
                       long replications, std::uint64_t seed,
                       double min_expected_cell) {
             SimulationConfig c;
             c.density = density;
             c.scheme = scheme;
             c.replications = replications;
             c.seed = seed;
             c.min_expected_cell = min_expected_cell;
             return c;
           }),
           py::arg("density"), py::arg("scheme"), py::arg("replications"),
           py::arg("seed") = 0, py::arg("min_expected_cell") = 5.0)
      .def_readwrite("replications", &SimulationConfig::replications)
      .def_readwrite("seed", &SimulationConfig::seed);

  py::class_<MonteCarloReport>(m, "MonteCarloReport")
      .def_readonly("n_success", &MonteCarloReport::n_success)
      .def_readonly("n_failed_fits", &MonteCarloReport::n_failed_fits)
      .def_readonly("theta_mean", &MonteCarloReport::theta_mean)
      .def_readonly("empirical_cov", &MonteCarloReport::empirical_cov)
      .def_readonly("empirical_defined", &MonteCarloReport::empirical_defined)
      .def_readonly("asymptotic_cov", &MonteCarloReport::asymptotic_cov)
      .def_readonly("max_relative_error", &MonteCarloReport::max_relative_error)
      .def_readonly("warnings", &MonteCarloReport::warnings)
      .def_readonly("theta_draws", &MonteCarloReport::theta_draws);

  py::class_<HypothesisSpec>(m, "HypothesisSpec")
      .def(py::init([](Matrix q, double alpha) {
             HypothesisSpec h;
             h.q = std::move(q);
             h.alpha = alpha;
             return h;
           }),
           py::arg("q"), py::arg("alpha") = 0.05)
      .def_readwrite("q", &HypothesisSpec::q)
      .def_readwrite("alpha", &HypothesisSpec::alpha);

  py::class_<PowerRequest>(m, "PowerRequest")
      .def(py::init([](Matrix theta_prime, Vector row_marg, Vector col_marg,
                       Scheme scheme, Vector proportions, double n,
                       double target_power) {
             PowerRequest r;
             r.theta_prime = std::move(theta_prime);
             r.row_marg = std::move(row_marg);
             r.col_marg = std::move(col_marg);
             r.scheme = scheme;
             r.proportions = std::move(proportions);
             r.n = n;
             r.target_power = target_power;
             return r;
           }),
           py::arg("theta_prime"), py::arg("row_marg"), py::arg("col_marg"),
           py::arg("scheme") = Scheme::M, py::arg("proportions") = Vector(),
           py::arg("n") = 0.0, py::arg("target_power") = 0.0)
      .def_readwrite("theta_prime", &PowerRequest::theta_prime)
      .def_readwrite("n", &PowerRequest::n)
      .def_readwrite("target_power", &PowerRequest::target_power)
      .def_readwrite("proportions", &PowerRequest::proportions);

  py::class_<Alternative>(m, "Alternative")
      .def_readonly("p_prime", &Alternative::p_prime)
      .def_readonly("sampling_density", &Alternative::sampling_density)
      .def_readonly("theta_cov", &Alternative::theta_cov);

  py::class_<WaldResult>(m, "WaldResult")
      .def_readonly("statistic", &WaldResult::statistic)
      .def_readonly("p_value", &WaldResult::p_value)
      .def_readonly("df", &WaldResult::df);

  // matkit
  m.def("kron", &kron, py::arg("a"), py::arg("b"));
  m.def("vec", static_cast<Vector (*)(const Matrix&)>(&vec), py::arg("a"));
  m.def("numerical_rank", &numerical_rank, py::arg("a"));

  // design
  m.def("build_model_matrices", &build_model_matrices, py::arg("spec"));
  m.def("build_model_matrices_raw", &build_model_matrices_raw, py::arg("z"),
        py::arg("J"), py::arg("K"));
  m.def("check_identifiability", &check_identifiability, py::arg("spec"),
        py::arg("table"));

  // fit
  m.def("fit_loglinear",
        [](const ContingencyTable& t, const ModelMatrices& mm) {
          return fit_loglinear(t, mm);
        },
        py::arg("table"), py::arg("mm"));
  m.def("extract_parameters", &extract_parameters, py::arg("eta"), py::arg("mm"));
  m.def("ipf_constrained",
        [](const Matrix& theta, const Vector& row_marg, const Vector& col_marg,
           const ModelMatrices& mm) {
          return ipf_constrained(theta, row_marg, col_marg, mm);
        },
        py::arg("theta_prime"), py::arg("row_marg"), py::arg("col_marg"),
        py::arg("mm"));
  m.def("expected_table", &expected_table, py::arg("density"), py::arg("scheme"));

  // asycov
  m.def("cell_covariances", &cell_covariances, py::arg("mu"), py::arg("mm"),
        py::arg("scheme"));
  m.def("gamma_theta_cov", &gamma_theta_cov, py::arg("mu"), py::arg("mm"),
        py::arg("scheme"));
  m.def("theta_cov_projection", &theta_cov_projection, py::arg("mu"), py::arg("mm"));
  m.def("contrast_gram", &contrast_gram, py::arg("mu"));
  m.def("theta_cov_explicit", &theta_cov_explicit, py::arg("mu"), py::arg("mm"));
  m.def("row_conditional_cov", &row_conditional_cov, py::arg("mu"));
  m.def("theta_cov_row_conditional", &theta_cov_row_conditional, py::arg("mu"),
        py::arg("mm"));
  m.def("theta_cov_factored", &theta_cov_factored, py::arg("mu"), py::arg("spec"));
  m.def("score_information", &score_information, py::arg("mu"), py::arg("mm"));
  m.def("covariance_bundle",
        [](const FitResult& fit, const ModelMatrices& mm, const DesignSpec& spec,
           const SchemeSpec& scheme) {
          return covariance_bundle(fit, mm, spec, scheme);
        },
        py::arg("fit"), py::arg("mm"), py::arg("spec"), py::arg("scheme"));

  // simulate
  m.def("sample_table", &sample_table, py::arg("config"),
        py::arg("replicate_index"));
  m.def("monte_carlo_cov", &monte_carlo_cov, py::arg("config"), py::arg("mm"),
        py::arg("spec"), py::arg("threads") = 0, py::arg("keep_draws") = false,
        py::call_guard<py::gil_scoped_release>());

  // power
  m.def("noncentral_chisq_cdf", &noncentral_chisq_cdf, py::arg("x"),
        py::arg("df"), py::arg("noncentrality"));
  m.def("chisq_cdf", &chisq_cdf, py::arg("x"), py::arg("df"));
  m.def("chisq_quantile", &chisq_quantile, py::arg("prob"), py::arg("df"));
  m.def("build_alternative", &build_alternative, py::arg("req"), py::arg("mm"),
        py::arg("spec"));
  m.def("power_at", &power_at, py::arg("req"), py::arg("hyp"), py::arg("mm"),
        py::arg("spec"));
  m.def("required_sample_size", &required_sample_size, py::arg("req"),
        py::arg("hyp"), py::arg("mm"), py::arg("spec"));
  m.def("wald_test", &wald_test, py::arg("theta_hat"), py::arg("theta_cov"),
        py::arg("hyp"));
  py::class_<ProportionSearchResult>(m, "ProportionSearchResult")
      .def_readonly("proportions", &ProportionSearchResult::proportions)
      .def_readonly("power", &ProportionSearchResult::power);
  m.def("optimal_proportions", &optimal_proportions, py::arg("req"),
        py::arg("hyp"), py::arg("mm"), py::arg("spec"), py::arg("resolution"));

  // bridge
  m.def("theta_from_beta_linear",
        [](const Vector& beta, double sigma_y2, const Matrix& cov_x) {
          LinearBridgeInput in;
          in.beta = beta;
          in.sigma_y2 = sigma_y2;
          in.cov_x = cov_x;
          return theta_from_beta_linear(in);
        },
        py::arg("beta"), py::arg("sigma_y2"), py::arg("cov_x"));
  m.def("beta_from_theta_linear", &beta_from_theta_linear, py::arg("theta"),
        py::arg("sigma_y2"), py::arg("cov_x"));
  m.def("theta_from_beta_mvlinear", &theta_from_beta_mvlinear, py::arg("beta"),
        py::arg("cov_y"), py::arg("cov_x"));
  m.def("beta_from_theta_loglinear", &beta_from_theta_loglinear, py::arg("theta"));
}
