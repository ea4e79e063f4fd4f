#ifndef STRATEFF_ESTIMATORS_HPP
#define STRATEFF_ESTIMATORS_HPP

#include <optional>
#include <string>

#include "strateff/data.hpp"
#include "strateff/inference.hpp"
#include "strateff/smoother.hpp"
#include "strateff/weighting.hpp"

namespace strateff {

enum class EstimatorForm { RegAdjust, PSCond, Ipw };

// Catalog entry for one estimator configuration. Reweighted ATT is rejected:
// the ATT needs no correction under stratification and silently accepting a
// reweighted variant would mask a caller bug.
struct EstimatorSpec {
  Estimand estimand = Estimand::Ate;
  EstimatorForm form = EstimatorForm::RegAdjust;
  bool reweighted = false;
  PiStarMode pi_star_mode = PiStarMode::Known;

  void validate() const;
  std::string id() const;
  static EstimatorSpec parse(const std::string& id);
};

struct EstimatorConfig {
  SmootherConfig smoother;
  TrimConfig trim;
  double ci_level = 0.95;
  bool diagnostics = false;
  // Known sample propensity per row; replaces the fitted first stage.
  std::optional<Eigen::VectorXd> propensity_override;
};

// Sample after the overlap-trimming policy, with the fitted sample
// propensity attached. With no covariates the propensity is the constant
// pi_star and no trimming applies.
struct PreparedSample {
  ObservationSet data;
  StratificationInfo info;
  Eigen::VectorXd ps;
  std::optional<SmootherFit> ps_fit;
  double kept_fraction = 1.0;
  Eigen::Index trimmed_rows = 0;
};

PreparedSample prepare_sample(const ObservationSet& data, const StratificationInfo& info,
                              const EstimatorConfig& config);

// Arm conditional means (and conditional outcome variances when requested)
// evaluated at every row, conditioning on the covariates or on the fitted
// propensity.
struct StageSet {
  Regressor regressor = Regressor::Covariates;
  Eigen::VectorXd mean1, mean0;
  Eigen::VectorXd sigma2_1, sigma2_0;
};

StageSet fit_stage_set(const PreparedSample& prep, Regressor regressor, bool with_variance,
                       const EstimatorConfig& config);

// Estimator cores over prefitted stages; the harness shares one StageSet
// across several estimator rows.
EffectEstimate ate_from_stages(const PreparedSample& prep, const StageSet& stages,
                               EstimatorForm form, bool reweighted,
                               const EstimatorConfig& config);
EffectEstimate att_from_stages(const PreparedSample& prep, const StageSet& stages,
                               EstimatorForm form, const EstimatorConfig& config);

EffectEstimate ate_regadjust(const ObservationSet& data, const StratificationInfo& info,
                             bool reweighted, const EstimatorConfig& config = {});
EffectEstimate ate_pscond(const ObservationSet& data, const StratificationInfo& info,
                          bool reweighted, const EstimatorConfig& config = {});
EffectEstimate ate_ipw(const ObservationSet& data, const StratificationInfo& info,
                       bool reweighted, const EstimatorConfig& config = {});
EffectEstimate att_regadjust(const ObservationSet& data, const StratificationInfo& info,
                             const EstimatorConfig& config = {});
EffectEstimate att_pscond(const ObservationSet& data, const StratificationInfo& info,
                          const EstimatorConfig& config = {});
EffectEstimate att_ipw(const ObservationSet& data, const StratificationInfo& info,
                       const EstimatorConfig& config = {});

}  // namespace strateff

#endif
