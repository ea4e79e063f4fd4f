#include "strateff/simulation.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "strateff/rng.hpp"

namespace strateff {

double normal_pdf(double t) {
  return std::exp(-0.5 * t * t) * 0.39894228040143267793994605993438;
}

double integrate_gk(const std::function<double(double)>& f, double lo, double hi,
                    double tol) {
  double error = 0.0;
  double value = 0.0;
  try {
    value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, lo, hi, 15, 1e-10, &error);
  } catch (const std::exception& e) {
    raise(ErrorCode::QuadratureFailure, e.what());
  }
  if (!std::isfinite(value) || error > tol * (1.0 + std::abs(value)))
    raise(ErrorCode::QuadratureFailure,
          "integral did not reach tolerance (error estimate " + std::to_string(error) +
              ")");
  return value;
}

namespace {

void validate_unconfounded(const UnconfoundedParams& p) {
  if (p.noise_sd0 < 0.0 || p.noise_sd1 < 0.0)
    raise(ErrorCode::InvalidNoise, "noise standard deviations must be nonnegative");
  if (!std::isfinite(p.ps_intercept) || !std::isfinite(p.ps_slope))
    raise(ErrorCode::DomainError, "propensity coefficients must be finite");
}

void validate_endogenous(const EndogenousParams& p) {
  if (p.p_always < 0.0 || p.p_complier < 0.0 || p.p_never < 0.0)
    raise(ErrorCode::InvalidShares, "type shares must be nonnegative");
  if (std::abs(p.p_always + p.p_complier + p.p_never - 1.0) > 1e-12)
    raise(ErrorCode::InvalidShares, "type shares must sum to 1");
  if (!(p.pz > 0.0 && p.pz < 1.0))
    raise(ErrorCode::DomainError, "instrument probability must lie in (0, 1)");
  if (p.noise_sd < 0.0)
    raise(ErrorCode::InvalidNoise, "noise standard deviation must be nonnegative");
}

DgpSpec build_unconfounded(Design design, const UnconfoundedParams& p) {
  validate_unconfounded(p);
  DgpSpec spec;
  spec.design = design;
  spec.unconfounded = p;
  spec.pi_pop = integrate_gk(
      [&](double x) { return logistic(p.ps_intercept + p.ps_slope * x) * normal_pdf(x); });
  if (!(spec.pi_pop > 0.0 && spec.pi_pop < 1.0))
    raise(ErrorCode::DomainError, "implied population treated fraction is degenerate");
  // ATE = mu1 - mu0 since E[X] = 0.
  spec.ate = Truth{p.mu1 - p.mu0, TruthProvenance::Analytic};
  const double ex_treated =
      integrate_gk([&](double x) {
        return x * logistic(p.ps_intercept + p.ps_slope * x) * normal_pdf(x);
      }) /
      spec.pi_pop;
  spec.att = Truth{p.mu1 - p.mu0 + (p.slope1 - p.slope0) * ex_treated,
                   TruthProvenance::Quadrature};
  return spec;
}

DgpSpec build_endogenous(Design design, const EndogenousParams& p) {
  validate_endogenous(p);
  DgpSpec spec;
  spec.design = design;
  spec.endogenous = p;
  spec.pi_pop = p.p_always + p.p_complier * p.pz;
  if (!(spec.pi_pop > 0.0 && spec.pi_pop < 1.0))
    raise(ErrorCode::DomainError, "implied population treated fraction is degenerate");
  if (p.p_complier > 0.0)
    spec.late = Truth{p.tau_complier, TruthProvenance::Analytic};
  return spec;
}

}  // namespace

DgpSpec make_dgp(Design design) {
  switch (design) {
    case Design::UnconfoundedA:
      return build_unconfounded(Design::UnconfoundedA, UnconfoundedParams{});
    case Design::EndogenousB:
      return build_endogenous(Design::EndogenousB, EndogenousParams{});
    case Design::Custom:
      raise(ErrorCode::ConfigError, "custom designs require explicit parameters");
  }
  raise(ErrorCode::ConfigError, "unknown design");
}

DgpSpec make_dgp(const UnconfoundedParams& params) {
  return build_unconfounded(Design::Custom, params);
}

DgpSpec make_dgp(const EndogenousParams& params) {
  return build_endogenous(Design::Custom, params);
}

namespace {

struct Unit {
  double y = 0.0;
  int d = 0;
  double x = 0.0;
  int z = 0;
};

Unit draw_unit(const DgpSpec& spec, Rng& rng) {
  Unit u;
  if (spec.unconfounded) {
    const UnconfoundedParams& p = *spec.unconfounded;
    u.x = rng.normal();
    u.d = rng.bernoulli(logistic(p.ps_intercept + p.ps_slope * u.x));
    const double eps = rng.normal();
    u.y = u.d == 1 ? p.mu1 + p.slope1 * u.x + p.noise_sd1 * eps
                   : p.mu0 + p.slope0 * u.x + p.noise_sd0 * eps;
  } else {
    const EndogenousParams& p = *spec.endogenous;
    const double t = rng.uniform();
    const int type = t < p.p_always ? 0 : (t < p.p_always + p.p_complier ? 1 : 2);
    u.z = rng.bernoulli(p.pz);
    u.d = type == 0 ? 1 : (type == 1 ? u.z : 0);
    const double base = type == 0 ? p.base_always : (type == 1 ? p.base_complier : p.base_never);
    const double tau = type == 0 ? p.tau_always : (type == 1 ? p.tau_complier : p.tau_never);
    u.y = base + tau * u.d + p.noise_sd * rng.normal();
  }
  return u;
}

ObservationSet units_to_set(const DgpSpec& spec, const std::vector<Unit>& units) {
  const Eigen::Index n = static_cast<Eigen::Index>(units.size());
  Eigen::VectorXd y(n);
  Eigen::VectorXi d(n);
  Eigen::MatrixXd x(n, spec.has_covariate() ? 1 : 0);
  std::optional<Eigen::VectorXi> z;
  if (spec.has_instrument()) z.emplace(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Unit& u = units[static_cast<std::size_t>(i)];
    y[i] = u.y;
    d[i] = u.d;
    if (spec.has_covariate()) x(i, 0) = u.x;
    if (z) (*z)[i] = u.z;
  }
  return ObservationSet(std::move(y), std::move(d), std::move(x), std::move(z));
}

}  // namespace

ObservationSet draw_population(const DgpSpec& spec, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) raise(ErrorCode::DomainError, "sample size must be at least 1");
  Rng rng(seed);
  std::vector<Unit> units(static_cast<std::size_t>(n));
  for (auto& u : units) u = draw_unit(spec, rng);
  return units_to_set(spec, units);
}

StratifiedDraw stratify(const DgpSpec& spec, Eigen::Index n, double pi_star_target,
                        std::uint64_t seed, bool keep_population_snapshot) {
  if (!(pi_star_target > 0.0 && pi_star_target < 1.0))
    raise(ErrorCode::DomainError, "pi_star target must lie in (0, 1)");
  if (n < 2) raise(ErrorCode::DomainError, "stratified draws need n >= 2");
  const Eigen::Index m1 = static_cast<Eigen::Index>(std::lround(
      static_cast<double>(n) * pi_star_target));
  const Eigen::Index m0 = n - m1;
  if (m1 < 1 || m0 < 1)
    raise(ErrorCode::DomainError, "pi_star target would leave an arm empty");

  Rng rng(seed);
  std::vector<Unit> treated, control, snapshot;
  treated.reserve(static_cast<std::size_t>(m1));
  control.reserve(static_cast<std::size_t>(m0));
  if (keep_population_snapshot) snapshot.reserve(static_cast<std::size_t>(n));

  const long budget = 1000L * static_cast<long>(n);
  long drawn = 0;
  while (static_cast<Eigen::Index>(treated.size()) < m1 ||
         static_cast<Eigen::Index>(control.size()) < m0) {
    if (drawn >= budget)
      raise(ErrorCode::RejectionBudgetExceeded,
            "arm-conditional rejection sampling exceeded " + std::to_string(budget) +
                " population draws");
    Unit u = draw_unit(spec, rng);
    ++drawn;
    if (keep_population_snapshot && static_cast<Eigen::Index>(snapshot.size()) < n)
      snapshot.push_back(u);
    if (u.d == 1 && static_cast<Eigen::Index>(treated.size()) < m1)
      treated.push_back(u);
    else if (u.d == 0 && static_cast<Eigen::Index>(control.size()) < m0)
      control.push_back(u);
  }

  std::vector<Unit> units;
  units.reserve(static_cast<std::size_t>(n));
  units.insert(units.end(), treated.begin(), treated.end());
  units.insert(units.end(), control.begin(), control.end());

  StratifiedDraw out{units_to_set(spec, units),
                     StratificationInfo::known(
                         spec.pi_pop, static_cast<double>(m1) / static_cast<double>(n)),
                     seed, std::nullopt};
  if (keep_population_snapshot) {
    // Top up the snapshot if stratification finished before n raw draws.
    while (static_cast<Eigen::Index>(snapshot.size()) < n)
      snapshot.push_back(draw_unit(spec, rng));
    out.population_snapshot = units_to_set(spec, snapshot);
  }
  return out;
}

OracleLimits oracle_limits(const DgpSpec& spec, double pi_star) {
  if (!(pi_star > 0.0 && pi_star < 1.0))
    raise(ErrorCode::DomainError, "pi_star must lie in (0, 1)");
  OracleLimits out;
  if (spec.unconfounded) {
    const UnconfoundedParams& p = *spec.unconfounded;
    const double pi = spec.pi_pop;
    const double tilt1 = pi_star / pi;
    const double tilt0 = (1.0 - pi_star) / (1.0 - pi);
    auto gstar = [&](double x) {
      const double ps = logistic(p.ps_intercept + p.ps_slope * x);
      return normal_pdf(x) * (ps * tilt1 + (1.0 - ps) * tilt0);
    };
    const double mass = integrate_gk(gstar);
    if (std::abs(mass - 1.0) > 1e-6)
      raise(ErrorCode::QuadratureFailure, "stratified density does not integrate to 1");
    out.e_star_x = integrate_gk([&](double x) { return x * gstar(x); });
    const double cate_slope = p.slope1 - p.slope0;
    out.naive_ate_limit =
        integrate_gk([&](double x) { return (p.mu1 - p.mu0 + cate_slope * x) * gstar(x); });
  } else {
    const EndogenousParams& p = *spec.endogenous;
    const double pi = spec.pi_pop;
    const double tilt1 = pi_star / pi;
    const double tilt0 = (1.0 - pi_star) / (1.0 - pi);
    // Six cells (type, z); D and E[Y | cell] are deterministic per cell.
    double num1 = 0.0, num0 = 0.0, den1 = 0.0, den0 = 0.0;
    double d1 = 0.0, d0 = 0.0;
    const double shares[3] = {p.p_always, p.p_complier, p.p_never};
    const double bases[3] = {p.base_always, p.base_complier, p.base_never};
    const double taus[3] = {p.tau_always, p.tau_complier, p.tau_never};
    for (int type = 0; type < 3; ++type) {
      for (int z = 0; z <= 1; ++z) {
        const double prob = shares[type] * (z == 1 ? p.pz : 1.0 - p.pz);
        const int d = type == 0 ? 1 : (type == 1 ? z : 0);
        const double mean_y = bases[type] + taus[type] * d;
        const double sample_prob = prob * (d == 1 ? tilt1 : tilt0);
        if (z == 1) {
          den1 += sample_prob;
          num1 += sample_prob * mean_y;
          d1 += sample_prob * d;
        } else {
          den0 += sample_prob;
          num0 += sample_prob * mean_y;
          d0 += sample_prob * d;
        }
      }
    }
    const double reduced = num1 / den1 - num0 / den0;
    const double first = d1 / den1 - d0 / den0;
    if (std::abs(first) < 1e-12)
      raise(ErrorCode::WeakFirstStage, "enumerated first stage is zero");
    out.naive_wald_limit = reduced / first;
  }
  return out;
}

}  // namespace strateff
