#ifndef STRATEFF_INFERENCE_HPP
#define STRATEFF_INFERENCE_HPP

#include <Eigen/Dense>

#include "strateff/data.hpp"

namespace strateff {

// Fitted first stages aligned to the rows of one sample. mean1/mean0 are the
// arm conditional means (on covariates or on the fitted propensity), ps the
// fitted sample propensity, sigma2_* conditional outcome variances.
struct FirstStageFits {
  Eigen::VectorXd mean1, mean0;
  Eigen::VectorXd ps;
  Eigen::VectorXd sigma2_1, sigma2_0;

  Eigen::VectorXd cate() const { return mean1 - mean0; }
};

struct InferenceConfig {
  // A first-stage residual term larger than this means the fitted propensity
  // sits at a clamp boundary; treated as an overlap failure.
  double adjust_abort = 1e6;
};

// Row-level decomposition of the reweighted-ATE influence function: the
// weighted CATE deviation, the w(X)-scaled residual adjustment, and the
// (D - pi*) term that enters only when pi* was estimated.
struct InfluenceDecomposition {
  Eigen::VectorXd main;
  Eigen::VectorXd adjust_firststage;
  Eigen::VectorXd adjust_pistar;

  Eigen::VectorXd total() const { return main + adjust_firststage + adjust_pistar; }
};

InfluenceDecomposition ate_influence(const ObservationSet& data,
                                     const StratificationInfo& info,
                                     const FirstStageFits& fits,
                                     const InferenceConfig& config = {});

// Plug-in sample analog of the reweighted-ATE asymptotic variance (variance
// of sqrt(n) times the estimation error); stated for known pi*.
double ate_variance_formula(const ObservationSet& data, const StratificationInfo& info,
                            const FirstStageFits& fits, const InferenceConfig& config = {});

// Row influence values of the ATT estimator (shared by the covariate- and
// propensity-conditioned forms); centered to mean zero.
Eigen::VectorXd att_influence(const ObservationSet& data, const StratificationInfo& info,
                              const FirstStageFits& fits, double att_point,
                              const InferenceConfig& config = {});

double att_variance_formula(const ObservationSet& data, const StratificationInfo& info,
                            const FirstStageFits& fits, double att_point,
                            const InferenceConfig& config = {});

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Normal interval point +- z * sqrt(var_sqrtn / n).
Interval build_confidence_interval(double point, double var_sqrtn, Eigen::Index n,
                                   double level);

double normal_quantile(double p);

}  // namespace strateff

#endif
