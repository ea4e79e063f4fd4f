#include "strateff/inference.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

namespace strateff {

namespace {

void check_fits(const ObservationSet& data, const FirstStageFits& fits,
                bool need_sigma) {
  const Eigen::Index n = data.n();
  if (fits.mean1.size() != n || fits.mean0.size() != n || fits.ps.size() != n)
    raise(ErrorCode::DimensionMismatch, "first-stage fits do not match the sample");
  if (need_sigma && (fits.sigma2_1.size() != n || fits.sigma2_0.size() != n))
    raise(ErrorCode::DimensionMismatch, "conditional variance fits are missing");
}

}  // namespace

InfluenceDecomposition ate_influence(const ObservationSet& data,
                                     const StratificationInfo& info,
                                     const FirstStageFits& fits,
                                     const InferenceConfig& config) {
  info.validate();
  check_fits(data, fits, false);
  const Eigen::Index n = data.n();
  const double v1 = info.treated_weight();
  const double v0 = info.control_weight();

  InfluenceDecomposition dec;
  dec.main.resize(n);
  dec.adjust_firststage.resize(n);
  dec.adjust_pistar = Eigen::VectorXd::Zero(n);

  const Eigen::VectorXd cate = fits.cate();
  double point = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    point += (data.d()[i] == 1 ? v1 : v0) * cate[i];
  point /= static_cast<double>(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int di = data.d()[i];
    const double ps = fits.ps[i];
    const double wx = ps * v1 + (1.0 - ps) * v0;
    dec.main[i] = (di == 1 ? v1 : v0) * cate[i] - point;
    const double resid = di == 1 ? (data.y()[i] - fits.mean1[i]) / ps
                                 : -(data.y()[i] - fits.mean0[i]) / (1.0 - ps);
    dec.adjust_firststage[i] = wx * resid;
    if (std::abs(dec.adjust_firststage[i]) > config.adjust_abort)
      raise(ErrorCode::OverlapViolation,
            "first-stage influence term exploded at row " + std::to_string(i + 1) +
                "; fitted propensity too close to 0 or 1");
  }
  // Center the residual adjustment; kernel fits are not exact projections, so
  // its finite-sample mean is not identically zero.
  dec.adjust_firststage.array() -= dec.adjust_firststage.mean();

  if (info.pi_star_mode == PiStarMode::Estimated) {
    const double ps2 = info.pi_star * info.pi_star;
    const double qs2 = (1.0 - info.pi_star) * (1.0 - info.pi_star);
    double abar = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ps = fits.ps[i];
      abar += (-ps * info.pi_pop / ps2 + (1.0 - ps) * (1.0 - info.pi_pop) / qs2) * cate[i];
    }
    abar /= static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i)
      dec.adjust_pistar[i] = abar * (data.d()[i] - info.pi_star);
  }
  return dec;
}

double ate_variance_formula(const ObservationSet& data, const StratificationInfo& info,
                            const FirstStageFits& fits, const InferenceConfig& config) {
  info.validate();
  check_fits(data, fits, true);
  const Eigen::Index n = data.n();
  const double v1 = info.treated_weight();
  const double v0 = info.control_weight();

  const Eigen::VectorXd cate = fits.cate();
  double point = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    point += (data.d()[i] == 1 ? v1 : v0) * cate[i];
  point /= static_cast<double>(n);

  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ps = fits.ps[i];
    const double wx = ps * v1 + (1.0 - ps) * v0;
    const double dev = (data.d()[i] == 1 ? v1 : v0) * cate[i] - point;
    const double t1 = wx * wx * fits.sigma2_1[i] / ps;
    const double t0 = wx * wx * fits.sigma2_0[i] / (1.0 - ps);
    if (!(std::isfinite(t1) && std::isfinite(t0)) || t1 > config.adjust_abort ||
        t0 > config.adjust_abort)
      raise(ErrorCode::OverlapViolation,
            "variance term exploded at row " + std::to_string(i + 1));
    acc += dev * dev + t1 + t0;
  }
  return acc / static_cast<double>(n);
}

Eigen::VectorXd att_influence(const ObservationSet& data, const StratificationInfo& info,
                              const FirstStageFits& fits, double att_point,
                              const InferenceConfig& config) {
  info.validate();
  check_fits(data, fits, false);
  const Eigen::Index n = data.n();
  const double ps_bar = info.pi_star;

  Eigen::VectorXd phi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int di = data.d()[i];
    const double ps = fits.ps[i];
    double v;
    if (di == 1) {
      v = (fits.mean1[i] - fits.mean0[i] - att_point) + (data.y()[i] - fits.mean1[i]);
    } else {
      v = -(ps / (1.0 - ps)) * (data.y()[i] - fits.mean0[i]);
    }
    phi[i] = v / ps_bar;
    if (std::abs(phi[i]) > config.adjust_abort)
      raise(ErrorCode::OverlapViolation,
            "influence term exploded at row " + std::to_string(i + 1));
  }
  phi.array() -= phi.mean();
  return phi;
}

double att_variance_formula(const ObservationSet& data, const StratificationInfo& info,
                            const FirstStageFits& fits, double att_point,
                            const InferenceConfig& config) {
  info.validate();
  check_fits(data, fits, true);
  const Eigen::Index n = data.n();
  const double ps_bar2 = info.pi_star * info.pi_star;

  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ps = fits.ps[i];
    const double dev = fits.mean1[i] - fits.mean0[i] - att_point;
    const double t_cate = ps * dev * dev / ps_bar2;
    const double t1 = ps * fits.sigma2_1[i] / ps_bar2;
    const double t0 = ps * ps * fits.sigma2_0[i] / (ps_bar2 * (1.0 - ps));
    if (!std::isfinite(t0) || t0 > config.adjust_abort)
      raise(ErrorCode::OverlapViolation,
            "control-side variance term exploded at row " + std::to_string(i + 1));
    acc += t_cate + t1 + t0;
  }
  return acc / static_cast<double>(n);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    raise(ErrorCode::DomainError, "quantile probability must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Interval build_confidence_interval(double point, double var_sqrtn, Eigen::Index n,
                                   double level) {
  if (!(level > 0.0 && level < 1.0))
    raise(ErrorCode::DomainError, "confidence level must lie in (0, 1)");
  if (!(var_sqrtn >= 0.0))
    raise(ErrorCode::DomainError, "variance must be nonnegative");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double half = z * std::sqrt(var_sqrtn / static_cast<double>(n));
  return Interval{point - half, point + half};
}

}  // namespace strateff
