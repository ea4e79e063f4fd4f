#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "strateff/data.hpp"
#include "strateff/estimators.hpp"
#include "strateff/late.hpp"
#include "strateff/montecarlo.hpp"
#include "strateff/report.hpp"
#include "strateff/simulation.hpp"
#include "strateff/weighting.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using namespace strateff;

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) raise(ErrorCode::IoError, "cannot write '" + out_path + "'");
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Covariate columns default to header names x1, x2, ... in numeric order.
std::vector<std::string> autodetect_covariates(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::FileNotFound, "cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header))
    raise(ErrorCode::SchemaMismatch, "file '" + path + "' has no header row");
  std::vector<std::pair<int, std::string>> found;
  const std::regex pat("^x([0-9]+)$");
  for (const auto& name : split_list(header)) {
    std::string trimmed = name;
    while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' '))
      trimmed.pop_back();
    std::smatch m;
    if (std::regex_match(trimmed, m, pat)) found.emplace_back(std::stoi(m[1]), trimmed);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> out;
  for (auto& [idx, name] : found) out.push_back(name);
  return out;
}

struct SmootherCliOptions {
  std::string mean_kind;
  std::string propensity_kind;
  double bandwidth = 0.0;
  double bandwidth_scale = 0.0;
  double trim_eps = -1.0;
  std::string trim_policy;
  double ci_level = 0.0;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--smoother", mean_kind, "conditional-mean smoother: nw or ll");
    cmd->add_option("--propensity", propensity_kind, "propensity model: logit or kernel");
    cmd->add_option("--bandwidth", bandwidth, "absolute kernel bandwidth override");
    cmd->add_option("--bandwidth-scale", bandwidth_scale,
                    "multiplier on the Silverman bandwidth");
    cmd->add_option("--trim-eps", trim_eps, "overlap trimming epsilon (default 0.01)");
    cmd->add_option("--trim-policy", trim_policy, "overlap policy: error or drop");
    cmd->add_option("--level", ci_level, "confidence level (default 0.95)");
  }

  void apply(EstimatorConfig& cfg) const {
    if (!mean_kind.empty()) {
      if (mean_kind == "nw")
        cfg.smoother.mean_kind = SmootherKind::KernelMean;
      else if (mean_kind == "ll")
        cfg.smoother.mean_kind = SmootherKind::LocalLinearMean;
      else
        raise(ErrorCode::ConfigError, "unknown smoother '" + mean_kind + "'");
    }
    if (!propensity_kind.empty()) {
      if (propensity_kind == "logit")
        cfg.smoother.propensity_kind = SmootherKind::LogitPropensity;
      else if (propensity_kind == "kernel")
        cfg.smoother.propensity_kind = SmootherKind::KernelPropensity;
      else
        raise(ErrorCode::ConfigError, "unknown propensity model '" + propensity_kind + "'");
    }
    if (bandwidth > 0.0) cfg.smoother.bandwidth = bandwidth;
    if (bandwidth_scale > 0.0) cfg.smoother.bandwidth_scale = bandwidth_scale;
    if (trim_eps >= 0.0) cfg.trim.epsilon = trim_eps;
    if (!trim_policy.empty()) {
      if (trim_policy == "error")
        cfg.trim.policy = TrimPolicy::Error;
      else if (trim_policy == "drop")
        cfg.trim.policy = TrimPolicy::Drop;
      else
        raise(ErrorCode::ConfigError, "unknown trim policy '" + trim_policy + "'");
    }
    if (ci_level > 0.0) cfg.ci_level = ci_level;
  }
};

int cmd_estimate(const std::string& data_path, const std::string& outcome,
                 const std::string& treatment, const std::string& covariates,
                 const std::string& instrument, const std::string& estimand,
                 const std::string& form, bool reweighted, double pi_pop,
                 double pi_star, const SmootherCliOptions& sm,
                 const std::string& out_path) {
  CsvSchema schema;
  schema.outcome = outcome;
  schema.treatment = treatment;
  if (covariates == "auto")
    schema.covariates = autodetect_covariates(data_path);
  else if (covariates != "none")
    schema.covariates = split_list(covariates);
  if (!instrument.empty())
    schema.instrument = instrument;
  else if (estimand == "late")
    schema.instrument = "z";

  const ObservationSet data = ingest_csv(data_path, schema);
  const StratificationInfo info = pi_star > 0.0
                                      ? StratificationInfo::known(pi_pop, pi_star)
                                      : StratificationInfo::estimated(pi_pop, data);
  EstimatorConfig cfg;
  sm.apply(cfg);

  EffectEstimate est;
  if (estimand == "late") {
    const WaldResult wald =
        reweighted ? wald_reweighted(data, info) : wald_naive(data);
    est = late_inference(data, info, wald, cfg.ci_level);
  } else if (estimand == "ate") {
    if (form == "regadj")
      est = ate_regadjust(data, info, reweighted, cfg);
    else if (form == "pscond")
      est = ate_pscond(data, info, reweighted, cfg);
    else if (form == "ipw")
      est = ate_ipw(data, info, reweighted, cfg);
    else
      raise(ErrorCode::ConfigError, "unknown form '" + form + "'");
  } else if (estimand == "att") {
    if (reweighted)
      raise(ErrorCode::ConfigError,
            "reweighted ATT is invalid: the ATT needs no stratification correction");
    if (form == "regadj")
      est = att_regadjust(data, info, cfg);
    else if (form == "pscond")
      est = att_pscond(data, info, cfg);
    else if (form == "ipw")
      est = att_ipw(data, info, cfg);
    else
      raise(ErrorCode::ConfigError, "unknown form '" + form + "'");
  } else {
    raise(ErrorCode::ConfigError, "unknown estimand '" + estimand + "'");
  }

  ordered_json j = to_json(est);
  j["n"] = data.n();
  j["pi_pop"] = info.pi_pop;
  j["pi_star"] = info.pi_star;
  j["pi_star_mode"] = info.pi_star_mode == PiStarMode::Known ? "known" : "estimated";
  write_output(j.dump(2) + "\n", out_path);
  return 0;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_simulate(const std::string& design, Eigen::Index n, double pi_star,
                 std::uint64_t seed, const std::string& out_path) {
  DgpSpec spec;
  if (design == "A")
    spec = make_dgp(Design::UnconfoundedA);
  else if (design == "B")
    spec = make_dgp(Design::EndogenousB);
  else
    raise(ErrorCode::ConfigError, "unknown design '" + design + "' (use A or B)");

  const StratifiedDraw draw = stratify(spec, n, pi_star, seed);
  std::ofstream out(out_path);
  if (!out) raise(ErrorCode::IoError, "cannot write '" + out_path + "'");
  out << "y,d";
  if (spec.has_covariate()) out << ",x1";
  if (spec.has_instrument()) out << ",z";
  out << "\n";
  for (Eigen::Index i = 0; i < draw.data.n(); ++i) {
    out << format_g17(draw.data.y()[i]) << ',' << draw.data.d()[i];
    if (spec.has_covariate()) out << ',' << format_g17(draw.data.x()(i, 0));
    if (spec.has_instrument()) out << ',' << draw.data.z()[i];
    out << "\n";
  }
  out.close();

  ordered_json meta;
  meta["schema_version"] = kSchemaVersion;
  meta["design"] = design;
  meta["n"] = n;
  meta["pi_pop"] = spec.pi_pop;
  meta["pi_star"] = draw.info.pi_star;
  meta["seed"] = seed;
  ordered_json truths;
  auto truth_json = [](const std::optional<Truth>& t) -> ordered_json {
    if (!t) return nullptr;
    ordered_json j;
    j["value"] = t->value;
    j["provenance"] =
        t->provenance == TruthProvenance::Analytic ? "analytic" : "quadrature";
    return j;
  };
  truths["ate"] = truth_json(spec.ate);
  truths["att"] = truth_json(spec.att);
  truths["late"] = truth_json(spec.late);
  meta["truths"] = truths;
  meta["oracle_limits"] = to_json(oracle_limits(spec, draw.info.pi_star));
  write_output(meta.dump(2) + "\n", out_path + ".json");
  return 0;
}

MonteCarloConfig parse_mc_config(const json& j) {
  MonteCarloConfig cfg;
  const std::string design = j.value("design", "A");
  if (design == "A") {
    cfg.spec = make_dgp(Design::UnconfoundedA);
  } else if (design == "B") {
    cfg.spec = make_dgp(Design::EndogenousB);
  } else if (design == "custom") {
    if (j.contains("unconfounded")) {
      const json& p = j["unconfounded"];
      UnconfoundedParams u;
      u.mu0 = p.value("mu0", u.mu0);
      u.slope0 = p.value("slope0", u.slope0);
      u.mu1 = p.value("mu1", u.mu1);
      u.slope1 = p.value("slope1", u.slope1);
      u.noise_sd0 = p.value("noise_sd0", u.noise_sd0);
      u.noise_sd1 = p.value("noise_sd1", u.noise_sd1);
      u.ps_intercept = p.value("ps_intercept", u.ps_intercept);
      u.ps_slope = p.value("ps_slope", u.ps_slope);
      cfg.spec = make_dgp(u);
    } else if (j.contains("endogenous")) {
      const json& p = j["endogenous"];
      EndogenousParams e;
      e.p_always = p.value("p_always", e.p_always);
      e.p_complier = p.value("p_complier", e.p_complier);
      e.p_never = p.value("p_never", e.p_never);
      e.pz = p.value("pz", e.pz);
      e.base_always = p.value("base_always", e.base_always);
      e.base_complier = p.value("base_complier", e.base_complier);
      e.base_never = p.value("base_never", e.base_never);
      e.tau_always = p.value("tau_always", e.tau_always);
      e.tau_complier = p.value("tau_complier", e.tau_complier);
      e.tau_never = p.value("tau_never", e.tau_never);
      e.noise_sd = p.value("noise_sd", e.noise_sd);
      cfg.spec = make_dgp(e);
    } else {
      raise(ErrorCode::ConfigError,
            "custom design needs an 'unconfounded' or 'endogenous' parameter block");
    }
  } else {
    raise(ErrorCode::ConfigError, "unknown design '" + design + "'");
  }

  cfg.n = j.value("n", cfg.n);
  cfg.replications = j.value("replications", cfg.replications);
  cfg.pi_star = j.value("pi_star", cfg.pi_star);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  const std::string mode = j.value("pi_star_mode", "known");
  if (mode == "known")
    cfg.pi_star_mode = PiStarMode::Known;
  else if (mode == "estimated")
    cfg.pi_star_mode = PiStarMode::Estimated;
  else
    raise(ErrorCode::ConfigError, "unknown pi_star_mode '" + mode + "'");
  const std::string sampling = j.value("sampling", "stratified");
  if (sampling == "stratified")
    cfg.sampling = SamplingScheme::Stratified;
  else if (sampling == "random")
    cfg.sampling = SamplingScheme::Random;
  else
    raise(ErrorCode::ConfigError, "unknown sampling scheme '" + sampling + "'");
  if (j.contains("estimators"))
    cfg.estimators = j["estimators"].get<std::vector<std::string>>();

  if (j.contains("smoother")) {
    const json& s = j["smoother"];
    const std::string mk = s.value("mean_kind", "nw");
    cfg.estimator.smoother.mean_kind =
        mk == "ll" ? SmootherKind::LocalLinearMean : SmootherKind::KernelMean;
    const std::string pk = s.value("propensity_kind", "logit");
    cfg.estimator.smoother.propensity_kind =
        pk == "kernel" ? SmootherKind::KernelPropensity : SmootherKind::LogitPropensity;
    if (s.contains("bandwidth") && !s["bandwidth"].is_null())
      cfg.estimator.smoother.bandwidth = s["bandwidth"].get<double>();
    cfg.estimator.smoother.bandwidth_scale =
        s.value("bandwidth_scale", cfg.estimator.smoother.bandwidth_scale);
    cfg.estimator.smoother.logit_max_iter =
        s.value("logit_max_iter", cfg.estimator.smoother.logit_max_iter);
    cfg.estimator.smoother.clamp_eps =
        s.value("clamp_eps", cfg.estimator.smoother.clamp_eps);
  }
  if (j.contains("trim")) {
    const json& t = j["trim"];
    cfg.estimator.trim.epsilon = t.value("epsilon", cfg.estimator.trim.epsilon);
    const std::string policy = t.value("policy", "error");
    cfg.estimator.trim.policy =
        policy == "drop" ? TrimPolicy::Drop : TrimPolicy::Error;
  }
  cfg.estimator.ci_level = j.value("ci_level", cfg.estimator.ci_level);
  return cfg;
}

int cmd_weights(double pi_pop, double pi_star, const std::string& data_path,
                const std::string& outcome, const std::string& treatment,
                const std::string& covariates, double trim_eps,
                const std::string& out_path) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;

  std::optional<ObservationSet> data;
  if (!data_path.empty()) {
    CsvSchema schema;
    schema.outcome = outcome;
    schema.treatment = treatment;
    if (covariates == "auto")
      schema.covariates = autodetect_covariates(data_path);
    else if (covariates != "none")
      schema.covariates = split_list(covariates);
    data = ingest_csv(data_path, schema);
  }

  StratificationInfo info;
  if (pi_star > 0.0) {
    info = StratificationInfo::known(pi_pop, pi_star);
  } else {
    if (!data)
      raise(ErrorCode::ConfigError, "--pi-star or --data required to determine pi*");
    info = StratificationInfo::estimated(pi_pop, *data);
  }
  j["pi_pop"] = info.pi_pop;
  j["pi_star"] = info.pi_star;
  j["pi_star_mode"] = info.pi_star_mode == PiStarMode::Known ? "known" : "estimated";
  j["treated_weight"] = info.treated_weight();
  j["control_weight"] = info.control_weight();
  j["population_mean_identity"] =
      info.pi_star * info.treated_weight() + (1.0 - info.pi_star) * info.control_weight();

  if (data) {
    std::optional<Eigen::VectorXd> ps;
    if (data->num_covariates() > 0) {
      SmootherConfig sc;
      const SmootherFit fit = fit_propensity(*data, sc);
      ps = fit.predict(data->x());
    }
    const StratWeights w = strat_weights(*data, info, ps ? &*ps : nullptr);
    j["n"] = data->n();
    j["mean_w"] = w.mean_w;
    ordered_json trim;
    trim["epsilon"] = trim_eps;
    if (ps) {
      const auto flagged = trim_flags(*ps, trim_eps);
      trim["flagged"] = flagged.size();
      trim["kept_fraction"] =
          1.0 - static_cast<double>(flagged.size()) / static_cast<double>(data->n());
    } else {
      trim["flagged"] = 0;
      trim["kept_fraction"] = 1.0;
    }
    j["trim"] = trim;
  }
  write_output(j.dump(2) + "\n", out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment-effect estimation from samples stratified on treatment status"};
  app.require_subcommand(1);

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate an effect from a CSV sample");
  std::string est_data, est_outcome = "y", est_treatment = "d", est_covariates = "auto";
  std::string est_instrument, est_estimand = "ate", est_form = "regadj", est_out;
  bool est_reweighted = false;
  double est_pi_pop = 0.0, est_pi_star = 0.0;
  SmootherCliOptions est_sm;
  est->add_option("--data", est_data, "input CSV path")->required();
  est->add_option("--outcome", est_outcome, "outcome column (default y)");
  est->add_option("--treatment", est_treatment, "treatment column (default d)");
  est->add_option("--covariates", est_covariates,
                  "comma-separated covariate columns, 'auto' (x1,x2,...) or 'none'");
  est->add_option("--instrument", est_instrument, "instrument column (default z for late)");
  est->add_option("--estimand", est_estimand, "ate, att or late")->required();
  est->add_option("--form", est_form, "regadj, pscond or ipw");
  est->add_flag("--reweighted", est_reweighted, "apply the stratification correction");
  est->add_option("--pi-pop", est_pi_pop, "population treated fraction")->required();
  est->add_option("--pi-star", est_pi_star,
                  "sample treated fraction (omit to estimate as mean(d))");
  est_sm.add_flags(est);
  est->add_option("--out", est_out, "write JSON here instead of stdout");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Write a stratified synthetic sample");
  std::string sim_design = "A", sim_out;
  Eigen::Index sim_n = 4000;
  double sim_pi_star = 0.8;
  std::uint64_t sim_seed = 1;
  sim->add_option("--design", sim_design, "A (unconfounded) or B (endogenous)");
  sim->add_option("--n", sim_n, "sample size");
  sim->add_option("--pi-star", sim_pi_star, "sample treated fraction");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--out", sim_out, "output CSV path (sidecar <out>.json)")->required();

  // montecarlo
  auto* mc = app.add_subcommand("montecarlo", "Replicate estimators over synthetic draws");
  std::string mc_config, mc_design, mc_estimators, mc_format = "text", mc_out;
  std::string mc_sampling, mc_smoother, mc_propensity, mc_trim_policy;
  Eigen::Index mc_n = -1;
  int mc_reps = -1, mc_threads = -1;
  double mc_pi_star = -1.0, mc_trim_eps = -1.0, mc_bandwidth = -1.0;
  double mc_bandwidth_scale = -1.0;
  std::uint64_t mc_seed = 0;
  bool mc_seed_set = false, mc_estimated = false;
  mc->add_option("--config", mc_config, "JSON config file; flags override");
  mc->add_option("--design", mc_design, "A or B");
  mc->add_option("--n", mc_n, "sample size per replication");
  mc->add_option("--reps", mc_reps, "number of replications");
  mc->add_option("--pi-star", mc_pi_star, "sample treated fraction");
  mc->add_option("--seed", mc_seed, "base seed")->each([&](const std::string&) {
    mc_seed_set = true;
  });
  mc->add_option("--estimators", mc_estimators,
                 "comma-separated ids, e.g. ate:regadj:rw,att:regadj,late:rw");
  mc->add_flag("--estimated-pi-star", mc_estimated, "treat pi* as estimated");
  mc->add_option("--sampling", mc_sampling, "stratified or random");
  mc->add_option("--smoother", mc_smoother, "nw or ll");
  mc->add_option("--propensity", mc_propensity, "logit or kernel");
  mc->add_option("--bandwidth", mc_bandwidth, "absolute kernel bandwidth override");
  mc->add_option("--bandwidth-scale", mc_bandwidth_scale,
                 "multiplier on the Silverman bandwidth");
  mc->add_option("--trim-eps", mc_trim_eps, "overlap trimming epsilon");
  mc->add_option("--trim-policy", mc_trim_policy, "error or drop");
  mc->add_option("--threads", mc_threads, "replication-level worker threads");
  mc->add_option("--format", mc_format, "text, json or csv");
  mc->add_option("--out", mc_out, "write the report here instead of stdout");

  // weights
  auto* wt = app.add_subcommand("weights", "Show stratification weights and trim diagnostics");
  std::string wt_data, wt_outcome = "y", wt_treatment = "d", wt_covariates = "auto", wt_out;
  double wt_pi_pop = 0.0, wt_pi_star = 0.0, wt_trim_eps = 0.01;
  wt->add_option("--pi-pop", wt_pi_pop, "population treated fraction")->required();
  wt->add_option("--pi-star", wt_pi_star, "sample treated fraction");
  wt->add_option("--data", wt_data, "optional CSV for data-level diagnostics");
  wt->add_option("--outcome", wt_outcome, "outcome column");
  wt->add_option("--treatment", wt_treatment, "treatment column");
  wt->add_option("--covariates", wt_covariates, "covariate columns, 'auto' or 'none'");
  wt->add_option("--trim-eps", wt_trim_eps, "overlap trimming epsilon");
  wt->add_option("--out", wt_out, "write JSON here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed())
      return cmd_estimate(est_data, est_outcome, est_treatment, est_covariates,
                          est_instrument, est_estimand, est_form, est_reweighted,
                          est_pi_pop, est_pi_star, est_sm, est_out);
    if (sim->parsed()) return cmd_simulate(sim_design, sim_n, sim_pi_star, sim_seed, sim_out);
    if (mc->parsed()) {
      json base = json::object();
      if (!mc_config.empty()) {
        std::ifstream in(mc_config);
        if (!in) raise(ErrorCode::FileNotFound, "cannot open '" + mc_config + "'");
        in >> base;
      }
      if (!mc_design.empty()) base["design"] = mc_design;
      if (mc_n >= 0) base["n"] = mc_n;
      if (mc_reps >= 0) base["replications"] = mc_reps;
      if (mc_pi_star >= 0.0) base["pi_star"] = mc_pi_star;
      if (mc_seed_set) base["seed"] = mc_seed;
      if (mc_threads >= 0) base["threads"] = mc_threads;
      if (mc_estimated) base["pi_star_mode"] = "estimated";
      if (!mc_sampling.empty()) base["sampling"] = mc_sampling;
      if (!mc_estimators.empty()) base["estimators"] = split_list(mc_estimators);
      if (!mc_smoother.empty()) base["smoother"]["mean_kind"] = mc_smoother;
      if (!mc_propensity.empty()) base["smoother"]["propensity_kind"] = mc_propensity;
      if (mc_bandwidth > 0.0) base["smoother"]["bandwidth"] = mc_bandwidth;
      if (mc_bandwidth_scale > 0.0) base["smoother"]["bandwidth_scale"] = mc_bandwidth_scale;
      if (mc_trim_eps >= 0.0) base["trim"]["epsilon"] = mc_trim_eps;
      if (!mc_trim_policy.empty()) base["trim"]["policy"] = mc_trim_policy;

      const MonteCarloConfig cfg = parse_mc_config(base);
      const MonteCarloReport report = run_montecarlo(cfg);
      ReportFormat fmt = ReportFormat::Text;
      if (mc_format == "json")
        fmt = ReportFormat::Json;
      else if (mc_format == "csv")
        fmt = ReportFormat::Csv;
      else if (mc_format != "text")
        raise(ErrorCode::ConfigError, "unknown format '" + mc_format + "'");
      write_output(emit_report(report, fmt), mc_out);
      return 0;
    }
    if (wt->parsed())
      return cmd_weights(wt_pi_pop, wt_pi_star, wt_data, wt_outcome, wt_treatment,
                         wt_covariates, wt_trim_eps, wt_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
