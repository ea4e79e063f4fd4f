#ifndef STRATEFF_LATE_HPP
#define STRATEFF_LATE_HPP

#include "strateff/data.hpp"

namespace strateff {

// Wald / IV slope from the two-moment system E[w (1,Z)'(Y - a - b D)] = 0.
// reduced_form and first_stage are the weighted covariance numerator and
// denominator; beta = reduced_form / first_stage.
struct WaldResult {
  double beta = 0.0;
  double alpha = 0.0;
  double reduced_form = 0.0;
  double first_stage = 0.0;
  bool weights_used = false;
};

// Unweighted sample Wald ratio. Inconsistent for the population LATE when
// the sample is stratified on treatment status.
WaldResult wald_naive(const ObservationSet& data);

// Reweighted Wald ratio; recovers the population LATE given pi.
WaldResult wald_reweighted(const ObservationSet& data, const StratificationInfo& info);

// Sandwich standard error for the two-moment system, treating the
// stratification weights as known constants, with a normal interval.
EffectEstimate late_inference(const ObservationSet& data, const StratificationInfo& info,
                              const WaldResult& result, double ci_level = 0.95);

}  // namespace strateff

#endif
