#ifndef STRATEFF_MONTECARLO_HPP
#define STRATEFF_MONTECARLO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "strateff/data.hpp"
#include "strateff/estimators.hpp"
#include "strateff/simulation.hpp"

namespace strateff {

enum class SamplingScheme { Stratified, Random };
enum class ReportFormat { Text, Json, Csv };

struct MonteCarloConfig {
  DgpSpec spec = make_dgp(Design::UnconfoundedA);
  Eigen::Index n = 4000;
  int replications = 200;
  double pi_star = 0.8;
  PiStarMode pi_star_mode = PiStarMode::Known;
  SamplingScheme sampling = SamplingScheme::Stratified;
  std::uint64_t seed = 1;
  std::vector<std::string> estimators;
  EstimatorConfig estimator;
  int threads = 1;  // replication-level parallelism; results are thread-count invariant
};

struct EstimatorReport {
  std::string id;
  Estimand estimand = Estimand::Ate;
  double truth = 0.0;
  int n_success = 0;
  int failures = 0;
  std::string first_error;  // empty when no replication failed
  std::optional<double> mean_point;
  std::optional<double> bias;
  std::optional<double> mc_sd;  // unset when fewer than 2 successes
  bool sd_undefined = false;
  std::optional<double> mean_se;
  std::optional<double> mean_se_formula;
  std::optional<double> se_sd_ratio;
  std::optional<double> se_formula_sd_ratio;
  std::optional<double> coverage95;
};

struct MonteCarloReport {
  std::vector<EstimatorReport> rows;
  std::string design;
  Eigen::Index n = 0;
  int replications = 0;
  double pi_pop = 0.0;
  double pi_star = 0.0;
  PiStarMode pi_star_mode = PiStarMode::Known;
  SamplingScheme sampling = SamplingScheme::Stratified;
  std::uint64_t seed = 0;
  OracleLimits oracles;
  double ci_level = 0.95;
  // Wall time appears in the text rendering only; the JSON rendering is
  // byte-deterministic for a given config and seed.
  double wall_time_seconds = 0.0;
};

MonteCarloReport run_montecarlo(const MonteCarloConfig& config);

std::string emit_report(const MonteCarloReport& report, ReportFormat format);

// Per-replication raw results, exposed for acceptance checks that need the
// replication paths rather than the aggregate.
struct ReplicationRecord {
  int replication = 0;
  std::string estimator;
  bool ok = false;
  double point = 0.0;
  double se = 0.0;
  double se_formula = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool has_inference = false;
  std::string error;
};

MonteCarloReport run_montecarlo(const MonteCarloConfig& config,
                                std::vector<ReplicationRecord>* raw);

}  // namespace strateff

#endif
