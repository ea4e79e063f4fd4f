#include "strateff/late.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "strateff/inference.hpp"

namespace strateff {

namespace {

constexpr double kWeakFirstStage = 1e-10;

Eigen::VectorXd late_weights(const ObservationSet& data, const StratificationInfo* info) {
  Eigen::VectorXd w(data.n());
  if (!info) {
    w.setOnes();
    return w;
  }
  const double v1 = info->treated_weight();
  const double v0 = info->control_weight();
  for (Eigen::Index i = 0; i < data.n(); ++i)
    w[i] = data.d()[i] == 1 ? v1 : v0;
  return w;
}

WaldResult weighted_wald(const ObservationSet& data, const Eigen::VectorXd& w,
                         bool weights_used) {
  const Eigen::Index n = data.n();
  const Eigen::VectorXi& z = data.z();  // raises MissingInstrument

  double sw = 0.0, swz = 0.0, swy = 0.0, swd = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    sw += w[i];
    swz += w[i] * z[i];
    swy += w[i] * data.y()[i];
    swd += w[i] * data.d()[i];
  }
  const double zbar = swz / sw;
  const double ybar = swy / sw;
  const double dbar = swd / sw;

  double rf = 0.0, fs = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zc = w[i] * (z[i] - zbar);
    rf += zc * data.y()[i];
    fs += zc * data.d()[i];
  }
  rf /= sw;
  fs /= sw;

  if (!(std::abs(fs) > kWeakFirstStage))
    raise(ErrorCode::WeakFirstStage,
          "weighted first stage is " + std::to_string(fs) +
              "; the instrument does not move treatment");

  WaldResult out;
  out.weights_used = weights_used;
  out.reduced_form = rf;
  out.first_stage = fs;
  out.beta = rf / fs;
  out.alpha = ybar - out.beta * dbar;
  return out;
}

}  // namespace

WaldResult wald_naive(const ObservationSet& data) {
  return weighted_wald(data, late_weights(data, nullptr), false);
}

WaldResult wald_reweighted(const ObservationSet& data, const StratificationInfo& info) {
  info.validate();
  return weighted_wald(data, late_weights(data, &info), true);
}

EffectEstimate late_inference(const ObservationSet& data, const StratificationInfo& info,
                              const WaldResult& result, double ci_level) {
  const Eigen::Index n = data.n();
  const Eigen::VectorXi& z = data.z();
  const Eigen::VectorXd w =
      late_weights(data, result.weights_used ? &info : nullptr);

  // Moments g_i = w_i (1, Z_i)' (Y_i - alpha - beta D_i); exactly identified,
  // so the sandwich is M^-1 Omega M^-T / n with M the moment Jacobian.
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d omega = Eigen::Matrix2d::Zero();
  Eigen::MatrixXd g(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double di = data.d()[i];
    const double zi = z[i];
    const double r = data.y()[i] - result.alpha - result.beta * di;
    m(0, 0) += w[i];
    m(0, 1) += w[i] * di;
    m(1, 0) += w[i] * zi;
    m(1, 1) += w[i] * zi * di;
    g(i, 0) = w[i] * r;
    g(i, 1) = w[i] * zi * r;
    omega(0, 0) += g(i, 0) * g(i, 0);
    omega(0, 1) += g(i, 0) * g(i, 1);
    omega(1, 1) += g(i, 1) * g(i, 1);
  }
  omega(1, 0) = omega(0, 1);
  m /= static_cast<double>(n);
  omega /= static_cast<double>(n);

  const double det = m.determinant();
  if (!(std::abs(det) > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())))
    raise(ErrorCode::SingularJacobian, "moment Jacobian is singular");

  const Eigen::Matrix2d minv = m.inverse();
  const Eigen::Matrix2d cov_sqrtn = minv * omega * minv.transpose();
  const double var_sqrtn = std::max(0.0, cov_sqrtn(1, 1));

  EffectEstimate est;
  est.estimand = Estimand::Late;
  est.method = result.weights_used ? "late:rw" : "late:naive";
  est.point = result.beta;
  est.ci_level = ci_level;
  est.se = std::sqrt(var_sqrtn / static_cast<double>(n));
  const Interval ci = build_confidence_interval(result.beta, var_sqrtn, n, ci_level);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  est.se_note = "GMM sandwich with stratification weights treated as fixed";

  est.influence.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    est.influence[static_cast<std::size_t>(i)] = minv(1, 0) * g(i, 0) + minv(1, 1) * g(i, 1);
  return est;
}

}  // namespace strateff
