#include "strateff/smoother.hpp"

#include <cmath>

namespace strateff {

namespace {

double column_sd(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1));
}

void validate_bandwidth_config(const SmootherConfig& config) {
  if (config.bandwidth && !(std::isfinite(*config.bandwidth) && *config.bandwidth > 0.0))
    raise(ErrorCode::BandwidthError, "bandwidth override must be a positive finite number");
  if (!(std::isfinite(config.bandwidth_scale) && config.bandwidth_scale > 0.0))
    raise(ErrorCode::BandwidthError, "bandwidth scale must be a positive finite number");
}

}  // namespace

Eigen::VectorXd silverman_bandwidths(const Eigen::MatrixXd& train_x) {
  const double t = static_cast<double>(train_x.rows());
  const double rate = std::pow(t, -0.2);
  Eigen::VectorXd h(train_x.cols());
  for (Eigen::Index j = 0; j < train_x.cols(); ++j) {
    const double sd = column_sd(train_x.col(j));
    h[j] = sd > 0.0 ? 1.06 * sd * rate : 1.0;
  }
  return h;
}

SmootherFit SmootherFit::kernel(SmootherKind kind, Eigen::MatrixXd train_x,
                                Eigen::VectorXd train_y, Eigen::VectorXd bandwidth,
                                bool clamp_unit, double clamp_eps,
                                std::optional<int> arm, std::uint64_t training_ref) {
  if (bandwidth.size() != train_x.cols())
    raise(ErrorCode::BandwidthError, "one bandwidth per regressor dimension required");
  for (Eigen::Index j = 0; j < bandwidth.size(); ++j)
    if (!(std::isfinite(bandwidth[j]) && bandwidth[j] > 0.0))
      raise(ErrorCode::BandwidthError, "bandwidth must be positive and finite");
  SmootherFit fit;
  fit.kind_ = kind;
  fit.arm_ = arm;
  fit.train_x_ = std::move(train_x);
  fit.train_y_ = std::move(train_y);
  fit.bandwidths_ = std::move(bandwidth);
  fit.clamp_unit_ = clamp_unit;
  fit.clamp_eps_ = clamp_eps;
  fit.training_ref_ = training_ref;
  return fit;
}

SmootherFit SmootherFit::logit(Eigen::VectorXd coefficients, double clamp_eps,
                               std::uint64_t training_ref) {
  SmootherFit fit;
  fit.kind_ = SmootherKind::LogitPropensity;
  fit.coefficients_ = std::move(coefficients);
  fit.clamp_unit_ = true;
  fit.clamp_eps_ = clamp_eps;
  fit.training_ref_ = training_ref;
  return fit;
}

Eigen::Index SmootherFit::input_dim() const {
  if (kind_ == SmootherKind::LogitPropensity) return coefficients_.size() - 1;
  return train_x_.cols();
}

Eigen::VectorXd SmootherFit::predict(const Eigen::MatrixXd& queries) const {
  if (queries.cols() != input_dim())
    raise(ErrorCode::DimensionMismatch,
          "query dimension " + std::to_string(queries.cols()) +
              " does not match training dimension " + std::to_string(input_dim()));
  const Eigen::Index m = queries.rows();
  Eigen::VectorXd out(m);
  if (m == 0) return out;

  if (kind_ == SmootherKind::LogitPropensity) {
    for (Eigen::Index i = 0; i < m; ++i) {
      double eta = coefficients_[0];
      for (Eigen::Index j = 0; j < queries.cols(); ++j)
        eta += coefficients_[j + 1] * queries(i, j);
      out[i] = 1.0 / (1.0 + std::exp(-eta));
    }
  } else {
    const Eigen::Index t = train_x_.rows();
    const Eigen::Index p = train_x_.cols();
    const bool local_linear = kind_ == SmootherKind::LocalLinearMean;
    Eigen::ArrayXd dist2(t), kw(t);
    Eigen::MatrixXd dx;  // scaled per-dim offsets, local-linear only
    if (local_linear && p > 0) dx.resize(t, p);
    Eigen::MatrixXd a(p + 1, p + 1);
    Eigen::VectorXd b(p + 1), design(p + 1);

    for (Eigen::Index i = 0; i < m; ++i) {
      dist2.setZero();
      for (Eigen::Index j = 0; j < p; ++j) {
        const double inv_h = 1.0 / bandwidths_[j];
        if (local_linear) {
          dx.col(j) = (train_x_.col(j).array() - queries(i, j)) * inv_h;
          dist2 += dx.col(j).array().square();
        } else {
          dist2 += ((train_x_.col(j).array() - queries(i, j)) * inv_h).square();
        }
      }
      kw = (-0.5 * dist2).exp();
      const double ksum = kw.sum();
      if (!(ksum > 1e-300)) {
        // all weights underflow: fall back to the nearest training point
        Eigen::Index nearest = 0;
        dist2.minCoeff(&nearest);
        out[i] = train_y_[nearest];
        continue;
      }
      bool solved = false;
      if (local_linear && p > 0) {
        a(0, 0) = ksum;
        b[0] = (kw * train_y_.array()).sum();
        for (Eigen::Index r = 0; r < p; ++r) {
          const Eigen::ArrayXd kdx = kw * dx.col(r).array();
          a(0, r + 1) = kdx.sum();
          a(r + 1, 0) = a(0, r + 1);
          b[r + 1] = (kdx * train_y_.array()).sum();
          for (Eigen::Index c = r; c < p; ++c) {
            a(r + 1, c + 1) = (kdx * dx.col(c).array()).sum();
            a(c + 1, r + 1) = a(r + 1, c + 1);
          }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smax = svd.singularValues()[0];
        const double smin = svd.singularValues()[p];
        if (smin > 0.0 && smax / smin < 1e10) {
          design = svd.solve(b);
          out[i] = design[0];
          solved = true;
        }
      }
      if (!solved) out[i] = (kw * train_y_.array()).sum() / ksum;
    }
  }

  if (clamp_unit_)
    out = out.array().max(clamp_eps_).min(1.0 - clamp_eps_);
  return out;
}

Eigen::VectorXd SmootherFit::predict_loo_training() const {
  if (kind_ == SmootherKind::LogitPropensity)
    raise(ErrorCode::DomainError, "leave-one-out prediction applies to kernel fits only");
  const Eigen::Index t = train_x_.rows();
  const Eigen::Index p = train_x_.cols();
  Eigen::VectorXd out(t);
  Eigen::ArrayXd dist2(t), kw(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    dist2.setZero();
    for (Eigen::Index j = 0; j < p; ++j) {
      const double inv_h = 1.0 / bandwidths_[j];
      dist2 += ((train_x_.col(j).array() - train_x_(i, j)) * inv_h).square();
    }
    kw = (-0.5 * dist2).exp();
    kw[i] = 0.0;  // drop the row's own contribution
    const double ksum = kw.sum();
    if (!(ksum > 1e-300)) {
      dist2[i] = std::numeric_limits<double>::infinity();
      Eigen::Index nearest = 0;
      dist2.minCoeff(&nearest);
      out[i] = train_y_[nearest];
      continue;
    }
    out[i] = (kw * train_y_.array()).sum() / ksum;
  }
  if (clamp_unit_)
    out = out.array().max(clamp_eps_).min(1.0 - clamp_eps_);
  return out;
}

Eigen::VectorXd predict(const SmootherFit& fit, const Eigen::MatrixXd& queries) {
  return fit.predict(queries);
}

namespace {

SmootherFit fit_kernel_on(SmootherKind kind, const Eigen::MatrixXd& regressor,
                          const Eigen::VectorXd& response,
                          const std::vector<Eigen::Index>& rows, bool clamp_unit,
                          std::optional<int> arm, const SmootherConfig& config,
                          std::uint64_t training_ref) {
  validate_bandwidth_config(config);
  const Eigen::Index t = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd tx(t, regressor.cols());
  Eigen::VectorXd ty(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    tx.row(i) = regressor.row(rows[static_cast<std::size_t>(i)]);
    ty[i] = response[rows[static_cast<std::size_t>(i)]];
  }
  Eigen::VectorXd h = config.bandwidth
                          ? Eigen::VectorXd::Constant(tx.cols(), *config.bandwidth)
                          : (silverman_bandwidths(tx) * config.bandwidth_scale).eval();
  return SmootherFit::kernel(kind, std::move(tx), std::move(ty), std::move(h),
                             clamp_unit, config.clamp_eps, arm, training_ref);
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

}  // namespace

SmootherFit fit_conditional_mean(const ObservationSet& data, int arm, Regressor regressor,
                                 const SmootherFit* ps_fit, const SmootherConfig& config) {
  if (arm != 0 && arm != 1) raise(ErrorCode::DomainError, "arm must be 0 or 1");
  if (config.mean_kind != SmootherKind::KernelMean &&
      config.mean_kind != SmootherKind::LocalLinearMean)
    raise(ErrorCode::DomainError, "conditional means require a kernel smoother kind");
  const auto rows = data.arm_rows(arm);
  if (rows.empty())
    raise(ErrorCode::EmptyArm, "arm " + std::to_string(arm) + " has no observations");

  Eigen::MatrixXd reg;
  if (regressor == Regressor::Covariates) {
    reg = data.x();
  } else {
    if (!ps_fit)
      raise(ErrorCode::DomainError, "propensity-conditioned mean requires a propensity fit");
    reg = ps_fit->predict(data.x());
  }
  return fit_kernel_on(config.mean_kind, reg, data.y(), rows, false, arm, config, data.id());
}

SmootherFit fit_arm_mean(const ObservationSet& data, int arm,
                         const Eigen::MatrixXd& regressor,
                         const Eigen::VectorXd& response, SmootherKind kind,
                         const SmootherConfig& config) {
  if (kind != SmootherKind::KernelMean && kind != SmootherKind::LocalLinearMean)
    raise(ErrorCode::DomainError, "arm means require a kernel smoother kind");
  const auto rows = data.arm_rows(arm);
  if (rows.empty())
    raise(ErrorCode::EmptyArm, "arm " + std::to_string(arm) + " has no observations");
  if (regressor.rows() != data.n() || response.size() != data.n())
    raise(ErrorCode::DimensionMismatch, "regressor/response do not match the sample");
  return fit_kernel_on(kind, regressor, response, rows, false, arm, config, data.id());
}

SmootherFit fit_propensity(const ObservationSet& data, const SmootherConfig& config) {
  if (data.num_covariates() == 0)
    raise(ErrorCode::DomainError, "propensity estimation requires at least one covariate");
  if (data.arm_count(1) == 0 || data.arm_count(0) == 0)
    raise(ErrorCode::EmptyArm, "propensity estimation needs both treatment arms");

  if (config.propensity_kind == SmootherKind::KernelPropensity) {
    Eigen::VectorXd d = data.d().cast<double>();
    validate_bandwidth_config(config);
    const double scale =
        config.propensity_bandwidth_scale.value_or(config.bandwidth_scale);
    if (!(std::isfinite(scale) && scale > 0.0))
      raise(ErrorCode::BandwidthError, "propensity bandwidth scale must be positive");
    Eigen::VectorXd h =
        config.bandwidth
            ? Eigen::VectorXd::Constant(data.num_covariates(), *config.bandwidth)
            : (silverman_bandwidths(data.x()) * scale).eval();
    return SmootherFit::kernel(SmootherKind::KernelPropensity, data.x(), std::move(d),
                               std::move(h), true, config.clamp_eps, std::nullopt,
                               data.id());
  }
  if (config.propensity_kind != SmootherKind::LogitPropensity)
    raise(ErrorCode::DomainError, "propensity kind must be logit or kernel");

  const Eigen::Index n = data.n();
  const Eigen::Index k = data.num_covariates();
  Eigen::MatrixXd design(n, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = data.x();
  const Eigen::VectorXd d = data.d().cast<double>();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k + 1);
  for (int iter = 0; iter < config.logit_max_iter; ++iter) {
    const Eigen::VectorXd eta = design * beta;
    const Eigen::VectorXd p = (1.0 + (-eta.array()).exp()).inverse();
    const Eigen::VectorXd score = design.transpose() * (d - p) / static_cast<double>(n);
    if (score.norm() < config.logit_tol) break;
    const Eigen::VectorXd wgt = (p.array() * (1.0 - p.array())).max(1e-12);
    const Eigen::MatrixXd hess =
        design.transpose() * wgt.asDiagonal() * design / static_cast<double>(n);
    const Eigen::VectorXd step = hess.ldlt().solve(score);
    if (!step.allFinite())
      raise(ErrorCode::SeparationError, "information matrix is singular");
    beta += step;
    if (beta.cwiseAbs().maxCoeff() > config.separation_threshold)
      raise(ErrorCode::SeparationError,
            "logit coefficients diverged beyond " +
                std::to_string(config.separation_threshold));
  }
  return SmootherFit::logit(std::move(beta), config.clamp_eps, data.id());
}

}  // namespace strateff
