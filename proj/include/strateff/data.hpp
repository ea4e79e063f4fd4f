#ifndef STRATEFF_DATA_HPP
#define STRATEFF_DATA_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "strateff/error.hpp"

namespace strateff {

// Immutable sample: outcome y, binary treatment d, covariate matrix x
// (n x k, k >= 0) and an optional binary instrument z. Validated once at
// construction; estimators consume it read-only, so sharing across threads
// is safe.
class ObservationSet {
 public:
  ObservationSet(Eigen::VectorXd y, Eigen::VectorXi d, Eigen::MatrixXd x,
                 std::optional<Eigen::VectorXi> z = std::nullopt);

  Eigen::Index n() const { return y_.size(); }
  Eigen::Index num_covariates() const { return x_.cols(); }

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXi& d() const { return d_; }
  const Eigen::MatrixXd& x() const { return x_; }

  bool has_instrument() const { return z_.has_value(); }
  const Eigen::VectorXi& z() const;

  Eigen::Index arm_count(int arm) const { return arm == 1 ? n_treated_ : n() - n_treated_; }
  double sample_treated_fraction() const {
    return static_cast<double>(n_treated_) / static_cast<double>(n());
  }

  // Row indices of one treatment arm, in data order.
  std::vector<Eigen::Index> arm_rows(int arm) const;

  ObservationSet subset(const std::vector<Eigen::Index>& rows) const;

  // Token identifying the sample a smoother was trained on.
  std::uint64_t id() const { return id_; }

 private:
  Eigen::VectorXd y_;
  Eigen::VectorXi d_;
  Eigen::MatrixXd x_;
  std::optional<Eigen::VectorXi> z_;
  Eigen::Index n_treated_ = 0;
  std::uint64_t id_ = 0;
};

enum class PiStarMode { Known, Estimated };

// Population treated fraction pi (always supplied by the user or the DGP)
// and sample treated fraction pi_star, either known from the sampling design
// or estimated as mean(d).
struct StratificationInfo {
  double pi_pop = 0.5;
  double pi_star = 0.5;
  PiStarMode pi_star_mode = PiStarMode::Known;

  static StratificationInfo known(double pi_pop, double pi_star);
  static StratificationInfo estimated(double pi_pop, const ObservationSet& data);

  void validate() const;

  // Arm-level reweighting constants pi/pi_star and (1-pi)/(1-pi_star).
  double treated_weight() const { return pi_pop / pi_star; }
  double control_weight() const { return (1.0 - pi_pop) / (1.0 - pi_star); }
};

struct CsvSchema {
  std::string outcome = "y";
  std::string treatment = "d";
  std::vector<std::string> covariates;  // may be empty (k = 0)
  std::optional<std::string> instrument;
};

// Reads a comma-separated file with a header row; decimal point '.', UTF-8.
// Rows with a missing mapped field or an invalid value fail with an error
// naming the 1-based data row; nothing is imputed or recoded.
ObservationSet ingest_csv(const std::string& path, const CsvSchema& schema);

struct CovariateSummary {
  std::string name;
  double mean, sd;
  double mean_treated, sd_treated;
  double mean_control, sd_control;
};

struct DataSummary {
  Eigen::Index n = 0;
  Eigen::Index n_treated = 0;
  Eigen::Index n_control = 0;
  double sample_treated_fraction = 0.0;
  std::vector<CovariateSummary> covariates;
  bool has_instrument = false;
  double instrument_mean = 0.0;
};

DataSummary summarize(const ObservationSet& data);

enum class Estimand { Ate, Att, Late };

const char* estimand_name(Estimand e);

// Point estimate with inference attachments. Naive (uncorrected) estimators
// carry no influence values and a zero standard error; se_formula holds the
// plug-in asymptotic-variance route when one exists for the estimator.
struct EffectEstimate {
  Estimand estimand = Estimand::Ate;
  std::string method;
  double point = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ci_level = 0.95;
  std::vector<double> influence;
  std::optional<double> se_formula;
  std::optional<std::string> se_note;

  // Variance shares of the influence components, cov(component, total) /
  // var(total); they sum to one. Empty when influence is empty.
  std::vector<std::pair<std::string, double>> variance_shares;

  // Per-row first stages for debugging: fitted arm means, propensity, weight.
  struct RowDiagnostics {
    Eigen::VectorXd mean1, mean0, propensity, weight;
  };
  std::optional<RowDiagnostics> diagnostics;
};

}  // namespace strateff

#endif
