#include "strateff/weighting.hpp"

#include <cmath>

namespace strateff {

namespace {

void check_unit_interval(double v, const char* what) {
  if (!(v > 0.0 && v < 1.0) || !std::isfinite(v))
    raise(ErrorCode::DomainError,
          std::string(what) + " must lie strictly inside (0, 1)");
}

}  // namespace

double population_propensity(double ps_sample, const StratificationInfo& info) {
  check_unit_interval(ps_sample, "ps_sample");
  info.validate();
  // Both terms are bounded by the arm tilts, so the ratio never overflows
  // even for propensities within one ulp of 0 or 1.
  const double a = ps_sample * info.treated_weight();
  const double b = (1.0 - ps_sample) * info.control_weight();
  return a / (a + b);
}

double sample_propensity(double ps_pop, const StratificationInfo& info) {
  check_unit_interval(ps_pop, "ps_pop");
  info.validate();
  const double a = ps_pop * (info.pi_star / info.pi_pop);
  const double b = (1.0 - ps_pop) * ((1.0 - info.pi_star) / (1.0 - info.pi_pop));
  return a / (a + b);
}

double neumaier_sum(const Eigen::VectorXd& v) {
  double sum = 0.0, comp = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = v[i];
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

StratWeights strat_weights(const ObservationSet& data, const StratificationInfo& info,
                           const Eigen::VectorXd* ps_fitted) {
  info.validate();
  StratWeights out;
  out.treated_weight = info.treated_weight();
  out.control_weight = info.control_weight();
  out.w.resize(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    out.w[i] = data.d()[i] == 1 ? out.treated_weight : out.control_weight;
  out.mean_w = neumaier_mean(out.w);
  if (ps_fitted) {
    if (ps_fitted->size() != data.n())
      raise(ErrorCode::DimensionMismatch, "fitted propensity length does not match sample");
    out.w_of_x = ps_fitted->array() * out.treated_weight +
                 (1.0 - ps_fitted->array()) * out.control_weight;
  }
  return out;
}

std::vector<Eigen::Index> trim_flags(const Eigen::VectorXd& ps_fitted, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 0.5))
    raise(ErrorCode::DomainError, "trim epsilon must lie in [0, 0.5)");
  std::vector<Eigen::Index> flagged;
  for (Eigen::Index i = 0; i < ps_fitted.size(); ++i)
    if (!(ps_fitted[i] >= epsilon && ps_fitted[i] <= 1.0 - epsilon)) flagged.push_back(i);
  return flagged;
}

}  // namespace strateff
