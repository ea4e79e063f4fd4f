#ifndef STRATEFF_WEIGHTING_HPP
#define STRATEFF_WEIGHTING_HPP

#include <Eigen/Dense>
#include <vector>

#include "strateff/data.hpp"

namespace strateff {

// Maps the sample propensity pi*(x) to the population propensity pi(x).
// Strictly increasing bijection of (0,1); identity when pi == pi_star.
double population_propensity(double ps_sample, const StratificationInfo& info);

// Exact algebraic inverse of population_propensity.
double sample_propensity(double ps_pop, const StratificationInfo& info);

// Per-row stratification weights D*pi/pi* + (1-D)*(1-pi)/(1-pi*), and the
// smoothed version w(x) = pi*(x)*pi/pi* + (1-pi*(x))*(1-pi)/(1-pi*) when a
// vector of fitted sample propensities is supplied.
struct StratWeights {
  Eigen::VectorXd w;
  Eigen::VectorXd w_of_x;  // empty when no propensity fit was attached
  double treated_weight = 1.0;
  double control_weight = 1.0;
  double mean_w = 1.0;  // compensated (Neumaier) mean of w
};

StratWeights strat_weights(const ObservationSet& data, const StratificationInfo& info,
                           const Eigen::VectorXd* ps_fitted = nullptr);

enum class TrimPolicy { Error, Drop };

struct TrimConfig {
  double epsilon = 0.01;
  TrimPolicy policy = TrimPolicy::Error;
};

// Rows whose fitted sample propensity falls outside [eps, 1-eps].
std::vector<Eigen::Index> trim_flags(const Eigen::VectorXd& ps_fitted, double epsilon);

// Compensated summation; exact enough that two-valued weight vectors with
// matching arm counts average to 1.0 bit-for-bit.
double neumaier_sum(const Eigen::VectorXd& v);

inline double neumaier_mean(const Eigen::VectorXd& v) {
  return neumaier_sum(v) / static_cast<double>(v.size());
}

}  // namespace strateff

#endif
