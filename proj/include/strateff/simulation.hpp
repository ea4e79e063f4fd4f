#ifndef STRATEFF_SIMULATION_HPP
#define STRATEFF_SIMULATION_HPP

#include <cstdint>
#include <functional>
#include <optional>

#include "strateff/data.hpp"

namespace strateff {

enum class Design { UnconfoundedA, EndogenousB, Custom };

// Unconfounded family: X ~ N(0,1), D | X ~ Bernoulli(logistic(a + b X)),
// Y_d = mu_d + slope_d * X + sd_d * eps. Design A is the default parameter
// set; any other choice is a Custom design.
struct UnconfoundedParams {
  double mu0 = 0.0, slope0 = 1.0;
  double mu1 = 1.0, slope1 = 2.0;
  double noise_sd0 = 0.25, noise_sd1 = 0.25;
  double ps_intercept = 0.0, ps_slope = 1.0;
};

// Endogenous family: latent compliance type (always/complier/never taker),
// Z ~ Bernoulli(pz) independent of type, D determined by (type, Z),
// Y = base_type + tau_type * D + noise. No covariates.
struct EndogenousParams {
  double p_always = 0.2, p_complier = 0.5, p_never = 0.3;
  double pz = 0.5;
  double base_always = 0.0, base_complier = 1.0, base_never = 2.0;
  double tau_always = 1.0, tau_complier = 2.0, tau_never = 0.0;
  double noise_sd = 0.25;
};

enum class TruthProvenance { Analytic, Quadrature };

struct Truth {
  double value = 0.0;
  TruthProvenance provenance = TruthProvenance::Analytic;
};

struct DgpSpec {
  Design design = Design::UnconfoundedA;
  std::optional<UnconfoundedParams> unconfounded;
  std::optional<EndogenousParams> endogenous;
  double pi_pop = 0.5;
  std::optional<Truth> ate, att, late;

  bool has_covariate() const { return unconfounded.has_value(); }
  bool has_instrument() const { return endogenous.has_value(); }
};

DgpSpec make_dgp(Design design);
DgpSpec make_dgp(const UnconfoundedParams& params);
DgpSpec make_dgp(const EndogenousParams& params);

// i.i.d. draws from the population law; deterministic given the seed.
ObservationSet draw_population(const DgpSpec& spec, Eigen::Index n, std::uint64_t seed);

struct StratifiedDraw {
  ObservationSet data;
  StratificationInfo info;
  std::uint64_t seed = 0;
  // First n raw population draws from the same stream, for oracle checks.
  std::optional<ObservationSet> population_snapshot;
};

// Exact-count stratification: round(n * pi_star_target) treated rows and the
// rest controls, filled by rejection sampling from the population law.
StratifiedDraw stratify(const DgpSpec& spec, Eigen::Index n, double pi_star_target,
                        std::uint64_t seed, bool keep_population_snapshot = false);

// Probability limits of the naive estimators under stratified sampling.
struct OracleLimits {
  std::optional<double> e_star_x;         // E*[X] under the stratified X-density
  std::optional<double> naive_ate_limit;  // E*[beta(X)] (all three naive ATE forms)
  std::optional<double> naive_wald_limit; // exact enumeration over (type, Z)
};

OracleLimits oracle_limits(const DgpSpec& spec, double pi_star);

// Adaptive Gauss-Kronrod on [lo, hi] to absolute/relative tolerance tol.
double integrate_gk(const std::function<double(double)>& f, double lo = -8.0,
                    double hi = 8.0, double tol = 1e-8);

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }
double normal_pdf(double t);

}  // namespace strateff

#endif
