#ifndef STRATEFF_SMOOTHER_HPP
#define STRATEFF_SMOOTHER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "strateff/data.hpp"

namespace strateff {

enum class SmootherKind { KernelMean, LocalLinearMean, LogitPropensity, KernelPropensity };
enum class Regressor { Covariates, FittedPropensity };

struct SmootherConfig {
  SmootherKind mean_kind = SmootherKind::KernelMean;
  SmootherKind propensity_kind = SmootherKind::LogitPropensity;
  std::optional<double> bandwidth;  // absolute override, applied to every dimension
  double bandwidth_scale = 1.0;     // multiplies the Silverman rule
  // Separate scale for the kernel propensity fit; falls back to
  // bandwidth_scale when unset.
  std::optional<double> propensity_bandwidth_scale;
  int logit_max_iter = 100;
  double logit_tol = 1e-8;             // mean-score gradient norm
  double separation_threshold = 30.0;  // max |coefficient| before declaring separation
  double clamp_eps = 1e-6;             // propensity predictions clamped to [eps, 1-eps]
};

// A fitted conditional mean or propensity. Kernel kinds keep their training
// points; prediction is pure and deterministic given the fit.
class SmootherFit {
 public:
  static SmootherFit kernel(SmootherKind kind, Eigen::MatrixXd train_x,
                            Eigen::VectorXd train_y, Eigen::VectorXd bandwidth,
                            bool clamp_unit, double clamp_eps,
                            std::optional<int> arm, std::uint64_t training_ref);
  static SmootherFit logit(Eigen::VectorXd coefficients, double clamp_eps,
                           std::uint64_t training_ref);

  Eigen::VectorXd predict(const Eigen::MatrixXd& queries) const;

  // Leave-one-out predictions at the training points themselves (kernel
  // kinds): each row's own kernel weight is removed, which matters when the
  // response being smoothed is the row's own treatment indicator.
  Eigen::VectorXd predict_loo_training() const;

  SmootherKind kind() const { return kind_; }
  std::optional<int> arm() const { return arm_; }
  // First-dimension bandwidth for kernel kinds; 0 for the logit kind.
  double bandwidth() const { return bandwidths_.size() > 0 ? bandwidths_[0] : 0.0; }
  const Eigen::VectorXd& bandwidths() const { return bandwidths_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }
  std::uint64_t training_ref() const { return training_ref_; }
  Eigen::Index input_dim() const;

 private:
  SmootherFit() = default;
  SmootherKind kind_ = SmootherKind::KernelMean;
  std::optional<int> arm_;
  Eigen::MatrixXd train_x_;
  Eigen::VectorXd train_y_;
  Eigen::VectorXd bandwidths_;
  Eigen::VectorXd coefficients_;
  bool clamp_unit_ = false;
  double clamp_eps_ = 1e-6;
  std::uint64_t training_ref_ = 0;
};

// E*[Y | D=arm, r] with r the covariates or a fitted sample propensity.
// Nadaraya-Watson with a product Gaussian kernel by default, local-linear on
// request; k = 0 degenerates to the arm mean.
SmootherFit fit_conditional_mean(const ObservationSet& data, int arm, Regressor regressor,
                                 const SmootherFit* ps_fit, const SmootherConfig& config);

// Kernel regression of a supplied response on a regressor matrix within one
// arm. Used for propensity-conditioned means and conditional second moments,
// where the regressor values are already in hand.
SmootherFit fit_arm_mean(const ObservationSet& data, int arm,
                         const Eigen::MatrixXd& regressor,
                         const Eigen::VectorXd& response, SmootherKind kind,
                         const SmootherConfig& config);

// Sample propensity pi*(x): logistic regression of d on x by IRLS, or
// Nadaraya-Watson of d on x. Predictions are clamped away from {0, 1}.
SmootherFit fit_propensity(const ObservationSet& data, const SmootherConfig& config);

Eigen::VectorXd predict(const SmootherFit& fit, const Eigen::MatrixXd& queries);

// Silverman rule per dimension: 1.06 * sd * t^(-1/5); 1.0 for degenerate columns.
Eigen::VectorXd silverman_bandwidths(const Eigen::MatrixXd& train_x);

}  // namespace strateff

#endif
