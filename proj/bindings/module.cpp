#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "strateff/data.hpp"
#include "strateff/estimators.hpp"
#include "strateff/inference.hpp"
#include "strateff/late.hpp"
#include "strateff/montecarlo.hpp"
#include "strateff/report.hpp"
#include "strateff/simulation.hpp"
#include "strateff/smoother.hpp"
#include "strateff/weighting.hpp"

namespace py = pybind11;
using namespace strateff;

namespace {

EstimatorConfig config_from_kwargs(const std::string& smoother, double bandwidth,
                                   double trim_eps, const std::string& trim_policy,
                                   double ci_level) {
  EstimatorConfig cfg;
  if (smoother == "ll")
    cfg.smoother.mean_kind = SmootherKind::LocalLinearMean;
  else if (smoother == "nw")
    cfg.smoother.mean_kind = SmootherKind::KernelMean;
  else
    raise(ErrorCode::ConfigError, "smoother must be 'nw' or 'll'");
  if (bandwidth > 0.0) cfg.smoother.bandwidth = bandwidth;
  cfg.trim.epsilon = trim_eps;
  if (trim_policy == "drop")
    cfg.trim.policy = TrimPolicy::Drop;
  else if (trim_policy != "error")
    raise(ErrorCode::ConfigError, "trim_policy must be 'error' or 'drop'");
  cfg.ci_level = ci_level;
  return cfg;
}

DgpSpec spec_from_name(const std::string& design) {
  if (design == "A") return make_dgp(Design::UnconfoundedA);
  if (design == "B") return make_dgp(Design::EndogenousB);
  raise(ErrorCode::ConfigError, "design must be 'A' or 'B'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Treatment-effect estimation under stratification on treatment status";

  py::register_exception<Error>(m, "StrateffError");

  py::enum_<PiStarMode>(m, "PiStarMode")
      .value("KNOWN", PiStarMode::Known)
      .value("ESTIMATED", PiStarMode::Estimated);

  py::class_<ObservationSet>(m, "ObservationSet")
      .def(py::init([](const Eigen::VectorXd& y, const Eigen::VectorXi& d,
                       py::object x, py::object z) {
             Eigen::MatrixXd xm(y.size(), 0);
             if (!x.is_none()) xm = x.cast<Eigen::MatrixXd>();
             std::optional<Eigen::VectorXi> zv;
             if (!z.is_none()) zv = z.cast<Eigen::VectorXi>();
             return ObservationSet(y, d, std::move(xm), std::move(zv));
           }),
           py::arg("y"), py::arg("d"), py::arg("x") = py::none(),
           py::arg("z") = py::none())
      .def_property_readonly("n", &ObservationSet::n)
      .def_property_readonly("num_covariates", &ObservationSet::num_covariates)
      .def_property_readonly("y", [](const ObservationSet& s) { return s.y(); })
      .def_property_readonly("d", [](const ObservationSet& s) { return s.d(); })
      .def_property_readonly("x", [](const ObservationSet& s) { return s.x(); })
      .def_property_readonly("has_instrument", &ObservationSet::has_instrument)
      .def_property_readonly("z", [](const ObservationSet& s) { return s.z(); })
      .def("sample_treated_fraction", &ObservationSet::sample_treated_fraction);

  py::class_<StratificationInfo>(m, "StratificationInfo")
      .def_static("known", &StratificationInfo::known, py::arg("pi_pop"),
                  py::arg("pi_star"))
      .def_static("estimated", &StratificationInfo::estimated, py::arg("pi_pop"),
                  py::arg("data"))
      .def_readonly("pi_pop", &StratificationInfo::pi_pop)
      .def_readonly("pi_star", &StratificationInfo::pi_star)
      .def_readonly("pi_star_mode", &StratificationInfo::pi_star_mode)
      .def("treated_weight", &StratificationInfo::treated_weight)
      .def("control_weight", &StratificationInfo::control_weight);

  py::class_<EffectEstimate>(m, "EffectEstimate")
      .def_property_readonly("estimand",
                             [](const EffectEstimate& e) {
                               return std::string(estimand_name(e.estimand));
                             })
      .def_readonly("method", &EffectEstimate::method)
      .def_readonly("point", &EffectEstimate::point)
      .def_readonly("se", &EffectEstimate::se)
      .def_readonly("ci_low", &EffectEstimate::ci_low)
      .def_readonly("ci_high", &EffectEstimate::ci_high)
      .def_readonly("influence", &EffectEstimate::influence)
      .def_property_readonly("se_formula",
                             [](const EffectEstimate& e) -> py::object {
                               if (e.se_formula) return py::float_(*e.se_formula);
                               return py::none();
                             })
      .def("to_json", [](const EffectEstimate& e) { return to_json(e).dump(2); });

  m.def("ingest_csv",
        [](const std::string& path, const std::string& outcome,
           const std::string& treatment, const std::vector<std::string>& covariates,
           py::object instrument) {
          CsvSchema schema;
          schema.outcome = outcome;
          schema.treatment = treatment;
          schema.covariates = covariates;
          if (!instrument.is_none()) schema.instrument = instrument.cast<std::string>();
          return ingest_csv(path, schema);
        },
        py::arg("path"), py::arg("outcome") = "y", py::arg("treatment") = "d",
        py::arg("covariates") = std::vector<std::string>{},
        py::arg("instrument") = py::none());

  m.def("summarize",
        [](const ObservationSet& data) { return to_json(summarize(data)).dump(2); });

  m.def("population_propensity", &population_propensity, py::arg("ps_sample"),
        py::arg("info"));
  m.def("sample_propensity", &sample_propensity, py::arg("ps_pop"), py::arg("info"));
  m.def("strat_weights",
        [](const ObservationSet& data, const StratificationInfo& info) {
          const StratWeights w = strat_weights(data, info);
          py::dict out;
          out["w"] = w.w;
          out["treated_weight"] = w.treated_weight;
          out["control_weight"] = w.control_weight;
          out["mean_w"] = w.mean_w;
          return out;
        },
        py::arg("data"), py::arg("info"));

#define STRATEFF_ATE(NAME)                                                          \
  m.def(#NAME,                                                                      \
        [](const ObservationSet& data, const StratificationInfo& info,              \
           bool reweighted, const std::string& smoother, double bandwidth,          \
           double trim_eps, const std::string& trim_policy, double ci_level) {      \
          return NAME(data, info, reweighted,                                       \
                      config_from_kwargs(smoother, bandwidth, trim_eps, trim_policy, \
                                         ci_level));                                \
        },                                                                          \
        py::arg("data"), py::arg("info"), py::arg("reweighted") = true,             \
        py::arg("smoother") = "nw", py::arg("bandwidth") = 0.0,                     \
        py::arg("trim_eps") = 0.01, py::arg("trim_policy") = "error",               \
        py::arg("ci_level") = 0.95)
  STRATEFF_ATE(ate_regadjust);
  STRATEFF_ATE(ate_pscond);
  STRATEFF_ATE(ate_ipw);
#undef STRATEFF_ATE

#define STRATEFF_ATT(NAME)                                                          \
  m.def(#NAME,                                                                      \
        [](const ObservationSet& data, const StratificationInfo& info,              \
           const std::string& smoother, double bandwidth, double trim_eps,          \
           const std::string& trim_policy, double ci_level) {                       \
          return NAME(data, info,                                                   \
                      config_from_kwargs(smoother, bandwidth, trim_eps, trim_policy, \
                                         ci_level));                                \
        },                                                                          \
        py::arg("data"), py::arg("info"), py::arg("smoother") = "nw",               \
        py::arg("bandwidth") = 0.0, py::arg("trim_eps") = 0.01,                     \
        py::arg("trim_policy") = "error", py::arg("ci_level") = 0.95)
  STRATEFF_ATT(att_regadjust);
  STRATEFF_ATT(att_pscond);
  STRATEFF_ATT(att_ipw);
#undef STRATEFF_ATT

  py::class_<WaldResult>(m, "WaldResult")
      .def_readonly("beta", &WaldResult::beta)
      .def_readonly("alpha", &WaldResult::alpha)
      .def_readonly("reduced_form", &WaldResult::reduced_form)
      .def_readonly("first_stage", &WaldResult::first_stage)
      .def_readonly("weights_used", &WaldResult::weights_used);

  m.def("wald_naive", &wald_naive, py::arg("data"));
  m.def("wald_reweighted", &wald_reweighted, py::arg("data"), py::arg("info"));
  m.def("late_inference", &late_inference, py::arg("data"), py::arg("info"),
        py::arg("result"), py::arg("ci_level") = 0.95);

  py::class_<DgpSpec>(m, "DgpSpec")
      .def_readonly("pi_pop", &DgpSpec::pi_pop)
      .def_property_readonly("ate",
                             [](const DgpSpec& s) -> py::object {
                               if (s.ate) return py::float_(s.ate->value);
                               return py::none();
                             })
      .def_property_readonly("att",
                             [](const DgpSpec& s) -> py::object {
                               if (s.att) return py::float_(s.att->value);
                               return py::none();
                             })
      .def_property_readonly("late", [](const DgpSpec& s) -> py::object {
        if (s.late) return py::float_(s.late->value);
        return py::none();
      });

  m.def("make_dgp", &spec_from_name, py::arg("design"));
  m.def("draw_population", &draw_population, py::arg("spec"), py::arg("n"),
        py::arg("seed"));
  m.def("stratify",
        [](const DgpSpec& spec, Eigen::Index n, double pi_star, std::uint64_t seed) {
          StratifiedDraw draw = stratify(spec, n, pi_star, seed);
          return py::make_tuple(std::move(draw.data), draw.info);
        },
        py::arg("spec"), py::arg("n"), py::arg("pi_star"), py::arg("seed"));
  m.def("oracle_limits",
        [](const DgpSpec& spec, double pi_star) {
          return to_json(oracle_limits(spec, pi_star)).dump(2);
        },
        py::arg("spec"), py::arg("pi_star"));

  m.def("run_montecarlo",
        [](const std::string& design, Eigen::Index n, int replications, double pi_star,
           std::uint64_t seed, const std::vector<std::string>& estimators,
           const std::string& smoother, const std::string& format, int threads) {
          MonteCarloConfig cfg;
          cfg.spec = spec_from_name(design);
          cfg.n = n;
          cfg.replications = replications;
          cfg.pi_star = pi_star;
          cfg.seed = seed;
          cfg.estimators = estimators;
          cfg.threads = threads;
          if (smoother == "ll")
            cfg.estimator.smoother.mean_kind = SmootherKind::LocalLinearMean;
          const MonteCarloReport report = run_montecarlo(cfg);
          ReportFormat fmt = ReportFormat::Json;
          if (format == "text")
            fmt = ReportFormat::Text;
          else if (format == "csv")
            fmt = ReportFormat::Csv;
          return emit_report(report, fmt);
        },
        py::arg("design"), py::arg("n"), py::arg("replications"), py::arg("pi_star"),
        py::arg("seed"), py::arg("estimators"), py::arg("smoother") = "nw",
        py::arg("format") = "json", py::arg("threads") = 1);

  m.attr("__version__") = "0.1.0";
}
