#include "strateff/estimators.hpp"

#include <cmath>

namespace strateff {

void EstimatorSpec::validate() const {
  if (estimand == Estimand::Att && reweighted)
    raise(ErrorCode::ConfigError,
          "reweighted ATT is invalid: the ATT estimator needs no stratification "
          "correction");
}

namespace {

const char* form_name(EstimatorForm form) {
  switch (form) {
    case EstimatorForm::RegAdjust: return "regadj";
    case EstimatorForm::PSCond: return "pscond";
    case EstimatorForm::Ipw: return "ipw";
  }
  return "?";
}

}  // namespace

std::string EstimatorSpec::id() const {
  std::string s = estimand_name(estimand);
  if (estimand != Estimand::Late) s += std::string(":") + form_name(form);
  if (estimand == Estimand::Ate || estimand == Estimand::Late)
    s += reweighted ? ":rw" : ":naive";
  return s;
}

EstimatorSpec EstimatorSpec::parse(const std::string& id) {
  EstimatorSpec spec;
  std::vector<std::string> parts;
  std::string cur;
  for (char c : id) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);

  auto bad = [&]() { raise(ErrorCode::ConfigError, "unknown estimator id '" + id + "'"); };
  if (parts.empty()) bad();
  if (parts[0] == "ate")
    spec.estimand = Estimand::Ate;
  else if (parts[0] == "att")
    spec.estimand = Estimand::Att;
  else if (parts[0] == "late")
    spec.estimand = Estimand::Late;
  else
    bad();

  std::size_t next = 1;
  if (spec.estimand != Estimand::Late) {
    if (parts.size() < 2) bad();
    if (parts[1] == "regadj")
      spec.form = EstimatorForm::RegAdjust;
    else if (parts[1] == "pscond")
      spec.form = EstimatorForm::PSCond;
    else if (parts[1] == "ipw")
      spec.form = EstimatorForm::Ipw;
    else
      bad();
    next = 2;
  }
  if (spec.estimand == Estimand::Att) {
    if (parts.size() != next) bad();
    spec.reweighted = false;
  } else {
    if (parts.size() != next + 1) bad();
    if (parts[next] == "rw")
      spec.reweighted = true;
    else if (parts[next] == "naive")
      spec.reweighted = false;
    else
      bad();
  }
  spec.validate();
  return spec;
}

namespace {

void check_two_arms(const ObservationSet& data) {
  if (data.arm_count(1) == 0) raise(ErrorCode::EmptyArm, "treated arm is empty");
  if (data.arm_count(0) == 0) raise(ErrorCode::EmptyArm, "control arm is empty");
}

Eigen::VectorXd clamp_unit(Eigen::VectorXd v, double eps) {
  return v.array().max(eps).min(1.0 - eps).matrix();
}

}  // namespace

PreparedSample prepare_sample(const ObservationSet& data, const StratificationInfo& info,
                              const EstimatorConfig& config) {
  info.validate();
  check_two_arms(data);
  if (info.pi_star_mode == PiStarMode::Estimated &&
      info.pi_star != data.sample_treated_fraction())
    raise(ErrorCode::DomainError,
          "estimated pi_star must equal the sample treated fraction");

  auto fitted_ps = [&](const ObservationSet& d) -> std::pair<Eigen::VectorXd, std::optional<SmootherFit>> {
    if (config.propensity_override) {
      if (config.propensity_override->size() != d.n())
        raise(ErrorCode::DimensionMismatch, "propensity override length does not match sample");
      return {clamp_unit(*config.propensity_override, config.smoother.clamp_eps),
              std::nullopt};
    }
    if (d.num_covariates() == 0)
      return {Eigen::VectorXd::Constant(d.n(), info.pi_star), std::nullopt};
    SmootherFit fit = fit_propensity(d, config.smoother);
    Eigen::VectorXd ps = fit.predict(d.x());
    return {std::move(ps), std::move(fit)};
  };

  auto [ps, fit] = fitted_ps(data);
  const auto flagged = trim_flags(ps, config.trim.epsilon);
  if (flagged.empty()) {
    return PreparedSample{data, info, std::move(ps), std::move(fit), 1.0, 0};
  }
  if (config.trim.policy == TrimPolicy::Error)
    raise(ErrorCode::OverlapViolation,
          std::to_string(flagged.size()) + " rows have fitted propensity outside [" +
              std::to_string(config.trim.epsilon) + ", " +
              std::to_string(1.0 - config.trim.epsilon) + "]");

  std::vector<Eigen::Index> kept;
  kept.reserve(static_cast<std::size_t>(data.n()));
  std::size_t f = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (f < flagged.size() && flagged[f] == i) {
      ++f;
      continue;
    }
    kept.push_back(i);
  }
  ObservationSet trimmed = data.subset(kept);
  check_two_arms(trimmed);
  // The kept subsample has its own treated fraction; pi_star is recomputed
  // from it and flagged as estimated.
  StratificationInfo new_info = StratificationInfo::estimated(info.pi_pop, trimmed);
  auto [ps2, fit2] = fitted_ps(trimmed);
  const double kept_fraction =
      static_cast<double>(trimmed.n()) / static_cast<double>(data.n());
  return PreparedSample{std::move(trimmed), new_info, std::move(ps2), std::move(fit2),
                        kept_fraction, static_cast<Eigen::Index>(flagged.size())};
}

StageSet fit_stage_set(const PreparedSample& prep, Regressor regressor, bool with_variance,
                       const EstimatorConfig& config) {
  const ObservationSet& data = prep.data;
  StageSet out;
  out.regressor = regressor;

  Eigen::MatrixXd reg;
  if (regressor == Regressor::Covariates) {
    reg = data.x();
  } else {
    // Condition on the fitted propensity through its logit index: the same
    // conditioning variable, but the kernel lives on an unbounded scale
    // instead of being squeezed against 0 and 1.
    reg = (prep.ps.array() / (1.0 - prep.ps.array())).log().matrix();
  }

  SmootherConfig mean_cfg = config.smoother;
  SmootherFit f1 = fit_arm_mean(data, 1, reg, data.y(), mean_cfg.mean_kind, mean_cfg);
  SmootherFit f0 = fit_arm_mean(data, 0, reg, data.y(), mean_cfg.mean_kind, mean_cfg);
  out.mean1 = f1.predict(reg);
  out.mean0 = f0.predict(reg);

  if (with_variance) {
    Eigen::VectorXd resid2_1(data.n()), resid2_0(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const double r1 = data.y()[i] - out.mean1[i];
      const double r0 = data.y()[i] - out.mean0[i];
      resid2_1[i] = r1 * r1;
      resid2_0[i] = r0 * r0;
    }
    SmootherFit v1 = fit_arm_mean(data, 1, reg, resid2_1, SmootherKind::KernelMean, mean_cfg);
    SmootherFit v0 = fit_arm_mean(data, 0, reg, resid2_0, SmootherKind::KernelMean, mean_cfg);
    out.sigma2_1 = v1.predict(reg).cwiseMax(0.0);
    out.sigma2_0 = v0.predict(reg).cwiseMax(0.0);
  }
  return out;
}

namespace {

void attach_inference(EffectEstimate& est, const PreparedSample& prep,
                      const FirstStageFits& fits, const EstimatorConfig& config) {
  const Eigen::Index n = prep.data.n();
  const InfluenceDecomposition dec = ate_influence(prep.data, prep.info, fits);
  const Eigen::VectorXd total = dec.total();
  const double var_sqrtn = total.squaredNorm() / static_cast<double>(n);
  est.se = std::sqrt(var_sqrtn / static_cast<double>(n));
  const Interval ci = build_confidence_interval(est.point, var_sqrtn, n, config.ci_level);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  est.influence.assign(total.data(), total.data() + n);
  est.se_formula = std::sqrt(
      ate_variance_formula(prep.data, prep.info, fits) / static_cast<double>(n));

  const double vt = total.squaredNorm();
  if (vt > 0.0) {
    est.variance_shares = {
        {"main", dec.main.dot(total) / vt},
        {"adjust_firststage", dec.adjust_firststage.dot(total) / vt},
        {"adjust_pistar", dec.adjust_pistar.dot(total) / vt},
    };
  }
}

void attach_diagnostics(EffectEstimate& est, const PreparedSample& prep,
                        const StageSet& stages, const Eigen::VectorXd& w,
                        const EstimatorConfig& config) {
  if (!config.diagnostics) return;
  EffectEstimate::RowDiagnostics diag;
  diag.mean1 = stages.mean1;
  diag.mean0 = stages.mean0;
  diag.propensity = prep.ps;
  diag.weight = w;
  est.diagnostics = std::move(diag);
}

}  // namespace

EffectEstimate ate_from_stages(const PreparedSample& prep, const StageSet& stages,
                               EstimatorForm form, bool reweighted,
                               const EstimatorConfig& config) {
  const ObservationSet& data = prep.data;
  const Eigen::Index n = data.n();
  const double v1 = reweighted ? prep.info.treated_weight() : 1.0;
  const double v0 = reweighted ? prep.info.control_weight() : 1.0;

  EffectEstimate est;
  est.estimand = Estimand::Ate;
  EstimatorSpec spec{Estimand::Ate, form, reweighted,
                     prep.info.pi_star_mode};
  est.method = spec.id();
  est.ci_level = config.ci_level;

  Eigen::VectorXd w(n);
  double acc = 0.0;
  if (form == EstimatorForm::Ipw) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ps = prep.ps[i];
      w[i] = ps * v1 + (1.0 - ps) * v0;
      const double term = data.d()[i] == 1 ? data.y()[i] / ps
                                           : -data.y()[i] / (1.0 - ps);
      acc += w[i] * term;
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      w[i] = data.d()[i] == 1 ? v1 : v0;
      acc += w[i] * (stages.mean1[i] - stages.mean0[i]);
    }
  }
  est.point = acc / static_cast<double>(n);
  est.ci_low = est.ci_high = est.point;

  if (reweighted) {
    FirstStageFits fits{stages.mean1, stages.mean0, prep.ps, stages.sigma2_1,
                        stages.sigma2_0};
    attach_inference(est, prep, fits, config);
    if (form == EstimatorForm::Ipw)
      est.se_note = "influence evaluated through fitted arm means";
  }
  attach_diagnostics(est, prep, stages, w, config);
  return est;
}

EffectEstimate att_from_stages(const PreparedSample& prep, const StageSet& stages,
                               EstimatorForm form, const EstimatorConfig& config) {
  const ObservationSet& data = prep.data;
  const Eigen::Index n = data.n();

  EffectEstimate est;
  est.estimand = Estimand::Att;
  EstimatorSpec spec{Estimand::Att, form, false, prep.info.pi_star_mode};
  est.method = spec.id();
  est.ci_level = config.ci_level;

  double point = 0.0;
  if (form == EstimatorForm::Ipw) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ps = prep.ps[i];
      acc += data.d()[i] == 1 ? data.y()[i]
                              : -data.y()[i] * ps / (1.0 - ps);
    }
    point = acc / static_cast<double>(n) / prep.info.pi_star;
  } else {
    double num = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.d()[i] == 1) num += data.y()[i] - stages.mean0[i];
    point = num / static_cast<double>(data.arm_count(1));
  }
  est.point = point;

  FirstStageFits fits{stages.mean1, stages.mean0, prep.ps, stages.sigma2_1,
                      stages.sigma2_0};
  const Eigen::VectorXd phi = att_influence(data, prep.info, fits, point);
  const double var_sqrtn = phi.squaredNorm() / static_cast<double>(n);
  est.se = std::sqrt(var_sqrtn / static_cast<double>(n));
  const Interval ci = build_confidence_interval(point, var_sqrtn, n, config.ci_level);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  est.influence.assign(phi.data(), phi.data() + n);
  est.se_formula = std::sqrt(att_variance_formula(data, prep.info, fits, point) /
                             static_cast<double>(n));

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  attach_diagnostics(est, prep, stages, w, config);
  return est;
}

namespace {

EffectEstimate run_ate(const ObservationSet& data, const StratificationInfo& info,
                       EstimatorForm form, bool reweighted, const EstimatorConfig& config) {
  if (form == EstimatorForm::PSCond && data.num_covariates() == 0 &&
      !config.propensity_override)
    raise(ErrorCode::DomainError,
          "propensity-score conditioning requires at least one covariate");
  PreparedSample prep = prepare_sample(data, info, config);
  const Regressor reg =
      form == EstimatorForm::PSCond ? Regressor::FittedPropensity : Regressor::Covariates;
  StageSet stages = fit_stage_set(prep, reg, reweighted, config);
  return ate_from_stages(prep, stages, form, reweighted, config);
}

EffectEstimate run_att(const ObservationSet& data, const StratificationInfo& info,
                       EstimatorForm form, const EstimatorConfig& config) {
  if (form == EstimatorForm::PSCond && data.num_covariates() == 0 &&
      !config.propensity_override)
    raise(ErrorCode::DomainError,
          "propensity-score conditioning requires at least one covariate");
  PreparedSample prep = prepare_sample(data, info, config);
  const Regressor reg =
      form == EstimatorForm::PSCond ? Regressor::FittedPropensity : Regressor::Covariates;
  StageSet stages = fit_stage_set(prep, reg, /*with_variance=*/true, config);
  return att_from_stages(prep, stages, form, config);
}

}  // namespace

EffectEstimate ate_regadjust(const ObservationSet& data, const StratificationInfo& info,
                             bool reweighted, const EstimatorConfig& config) {
  return run_ate(data, info, EstimatorForm::RegAdjust, reweighted, config);
}

EffectEstimate ate_pscond(const ObservationSet& data, const StratificationInfo& info,
                          bool reweighted, const EstimatorConfig& config) {
  return run_ate(data, info, EstimatorForm::PSCond, reweighted, config);
}

EffectEstimate ate_ipw(const ObservationSet& data, const StratificationInfo& info,
                       bool reweighted, const EstimatorConfig& config) {
  return run_ate(data, info, EstimatorForm::Ipw, reweighted, config);
}

EffectEstimate att_regadjust(const ObservationSet& data, const StratificationInfo& info,
                             const EstimatorConfig& config) {
  return run_att(data, info, EstimatorForm::RegAdjust, config);
}

EffectEstimate att_pscond(const ObservationSet& data, const StratificationInfo& info,
                          const EstimatorConfig& config) {
  return run_att(data, info, EstimatorForm::PSCond, config);
}

EffectEstimate att_ipw(const ObservationSet& data, const StratificationInfo& info,
                       const EstimatorConfig& config) {
  return run_att(data, info, EstimatorForm::Ipw, config);
}

}  // namespace strateff
