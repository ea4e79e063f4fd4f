#include "strateff/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "strateff/late.hpp"
#include "strateff/rng.hpp"

namespace strateff {

namespace {

struct RepCell {
  bool ok = false;
  double point = 0.0;
  double se = 0.0;
  double se_formula = std::numeric_limits<double>::quiet_NaN();
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool has_inference = false;
  std::string error;
};

struct Plan {
  std::vector<EstimatorSpec> specs;
  bool need_x_stages = false;
  bool need_x_variance = false;
  bool need_ps_stages = false;
  bool need_ps_variance = false;
  bool need_late = false;
};

Plan build_plan(const MonteCarloConfig& cfg) {
  if (cfg.estimators.empty())
    raise(ErrorCode::ConfigError, "no estimators requested");
  if (cfg.replications < 1)
    raise(ErrorCode::ConfigError, "replications must be at least 1");
  if (cfg.n < 2) raise(ErrorCode::ConfigError, "n must be at least 2");

  Plan plan;
  for (const auto& id : cfg.estimators) {
    EstimatorSpec spec = EstimatorSpec::parse(id);
    if (spec.estimand == Estimand::Late) {
      if (!cfg.spec.has_instrument())
        raise(ErrorCode::ConfigError, "design has no instrument; '" + id + "' unavailable");
      if (!cfg.spec.late)
        raise(ErrorCode::ConfigError, "design has no LATE truth; '" + id + "' unavailable");
      plan.need_late = true;
    } else {
      const bool needs_truth_ate = spec.estimand == Estimand::Ate;
      if (needs_truth_ate && !cfg.spec.ate)
        raise(ErrorCode::ConfigError, "design has no ATE truth; '" + id + "' unavailable");
      if (!needs_truth_ate && !cfg.spec.att)
        raise(ErrorCode::ConfigError, "design has no ATT truth; '" + id + "' unavailable");
      if (spec.form == EstimatorForm::PSCond) {
        if (!cfg.spec.has_covariate())
          raise(ErrorCode::ConfigError,
                "propensity conditioning needs a covariate; '" + id + "' unavailable");
        plan.need_ps_stages = true;
        if (spec.reweighted || spec.estimand == Estimand::Att) plan.need_ps_variance = true;
      } else {
        const bool inference = spec.reweighted || spec.estimand == Estimand::Att;
        if (spec.form == EstimatorForm::RegAdjust || inference) plan.need_x_stages = true;
        if (inference) plan.need_x_variance = true;
      }
    }
    plan.specs.push_back(spec);
  }
  return plan;
}

double truth_for(const MonteCarloConfig& cfg, Estimand estimand) {
  switch (estimand) {
    case Estimand::Ate: return cfg.spec.ate->value;
    case Estimand::Att: return cfg.spec.att->value;
    case Estimand::Late: return cfg.spec.late->value;
  }
  return 0.0;
}

std::vector<RepCell> run_one_replication(const MonteCarloConfig& cfg, const Plan& plan,
                                         int rep) {
  const std::uint64_t rep_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  std::vector<RepCell> cells(plan.specs.size());

  try {
    ObservationSet data = [&]() {
      if (cfg.sampling == SamplingScheme::Stratified)
        return stratify(cfg.spec, cfg.n, cfg.pi_star, rep_seed).data;
      return draw_population(cfg.spec, cfg.n, rep_seed);
    }();
    StratificationInfo info =
        cfg.sampling == SamplingScheme::Random
            ? StratificationInfo::estimated(cfg.spec.pi_pop, data)
            : (cfg.pi_star_mode == PiStarMode::Estimated
                   ? StratificationInfo::estimated(cfg.spec.pi_pop, data)
                   : StratificationInfo::known(cfg.spec.pi_pop,
                                               data.sample_treated_fraction()));

    std::optional<PreparedSample> prep;
    std::optional<StageSet> x_stages, ps_stages;
    auto ensure_prep = [&]() -> PreparedSample& {
      if (!prep) prep = prepare_sample(data, info, cfg.estimator);
      return *prep;
    };
    auto ensure_x = [&]() -> StageSet& {
      if (!x_stages)
        x_stages = fit_stage_set(ensure_prep(), Regressor::Covariates,
                                 plan.need_x_variance, cfg.estimator);
      return *x_stages;
    };
    auto ensure_ps = [&]() -> StageSet& {
      if (!ps_stages)
        ps_stages = fit_stage_set(ensure_prep(), Regressor::FittedPropensity,
                                  plan.need_ps_variance, cfg.estimator);
      return *ps_stages;
    };

    for (std::size_t j = 0; j < plan.specs.size(); ++j) {
      const EstimatorSpec& spec = plan.specs[j];
      RepCell& cell = cells[j];
      try {
        EffectEstimate est;
        if (spec.estimand == Estimand::Late) {
          WaldResult wald = spec.reweighted ? wald_reweighted(data, info) : wald_naive(data);
          est = late_inference(data, info, wald, cfg.estimator.ci_level);
        } else if (spec.estimand == Estimand::Ate) {
          const StageSet& stages =
              spec.form == EstimatorForm::PSCond ? ensure_ps() : ensure_x();
          est = ate_from_stages(ensure_prep(), stages, spec.form, spec.reweighted,
                                cfg.estimator);
        } else {
          const StageSet& stages =
              spec.form == EstimatorForm::PSCond ? ensure_ps() : ensure_x();
          est = att_from_stages(ensure_prep(), stages, spec.form, cfg.estimator);
        }
        cell.ok = true;
        cell.point = est.point;
        cell.se = est.se;
        cell.se_formula = est.se_formula.value_or(std::numeric_limits<double>::quiet_NaN());
        cell.ci_low = est.ci_low;
        cell.ci_high = est.ci_high;
        cell.has_inference = !est.influence.empty();
      } catch (const Error& e) {
        cell.ok = false;
        cell.error = e.what();
      }
    }
  } catch (const Error& e) {
    for (auto& cell : cells) {
      cell.ok = false;
      cell.error = e.what();
    }
  }
  return cells;
}

}  // namespace

MonteCarloReport run_montecarlo(const MonteCarloConfig& config) {
  return run_montecarlo(config, nullptr);
}

MonteCarloReport run_montecarlo(const MonteCarloConfig& config,
                                std::vector<ReplicationRecord>* raw) {
  const auto t0 = std::chrono::steady_clock::now();
  const Plan plan = build_plan(config);
  const int R = config.replications;

  std::vector<std::vector<RepCell>> grid(static_cast<std::size_t>(R));
  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    for (int r = 0; r < R; ++r)
      grid[static_cast<std::size_t>(r)] = run_one_replication(config, plan, r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= R) break;
        grid[static_cast<std::size_t>(r)] = run_one_replication(config, plan, r);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MonteCarloReport report;
  switch (config.spec.design) {
    case Design::UnconfoundedA: report.design = "A"; break;
    case Design::EndogenousB: report.design = "B"; break;
    case Design::Custom: report.design = "custom"; break;
  }
  report.n = config.n;
  report.replications = R;
  report.pi_pop = config.spec.pi_pop;
  report.pi_star = config.pi_star;
  report.pi_star_mode = config.pi_star_mode;
  report.sampling = config.sampling;
  report.seed = config.seed;
  report.ci_level = config.estimator.ci_level;
  report.oracles = oracle_limits(config.spec, config.sampling == SamplingScheme::Random
                                                  ? config.spec.pi_pop
                                                  : config.pi_star);

  int total_success = 0;
  for (std::size_t j = 0; j < plan.specs.size(); ++j) {
    EstimatorReport row;
    row.id = plan.specs[j].id();
    row.estimand = plan.specs[j].estimand;
    row.truth = truth_for(config, plan.specs[j].estimand);

    std::vector<const RepCell*> ok_cells;
    for (int r = 0; r < R; ++r) {
      const RepCell& cell = grid[static_cast<std::size_t>(r)][j];
      if (cell.ok) {
        ok_cells.push_back(&cell);
      } else {
        ++row.failures;
        if (row.first_error.empty()) row.first_error = cell.error;
      }
      if (raw) {
        ReplicationRecord rec;
        rec.replication = r;
        rec.estimator = row.id;
        rec.ok = cell.ok;
        rec.point = cell.point;
        rec.se = cell.se;
        rec.se_formula = cell.se_formula;
        rec.ci_low = cell.ci_low;
        rec.ci_high = cell.ci_high;
        rec.has_inference = cell.has_inference;
        rec.error = cell.error;
        raw->push_back(std::move(rec));
      }
    }
    row.n_success = static_cast<int>(ok_cells.size());
    total_success += row.n_success;

    if (row.n_success > 0) {
      double mean = 0.0;
      for (const auto* c : ok_cells) mean += c->point;
      mean /= row.n_success;
      row.mean_point = mean;
      row.bias = mean - row.truth;
      if (row.n_success >= 2) {
        double ss = 0.0;
        for (const auto* c : ok_cells) ss += (c->point - mean) * (c->point - mean);
        row.mc_sd = std::sqrt(ss / (row.n_success - 1));
      } else {
        row.sd_undefined = true;
      }
      const bool with_inference =
          std::all_of(ok_cells.begin(), ok_cells.end(),
                      [](const RepCell* c) { return c->has_inference; });
      if (with_inference) {
        double mse = 0.0, msef = 0.0;
        int covered = 0, nf = 0;
        for (const auto* c : ok_cells) {
          mse += c->se;
          if (std::isfinite(c->se_formula)) {
            msef += c->se_formula;
            ++nf;
          }
          if (c->ci_low <= row.truth && row.truth <= c->ci_high) ++covered;
        }
        row.mean_se = mse / row.n_success;
        if (nf == row.n_success) row.mean_se_formula = msef / nf;
        row.coverage95 = static_cast<double>(covered) / row.n_success;
        if (row.mc_sd && *row.mc_sd > 0.0) {
          row.se_sd_ratio = *row.mean_se / *row.mc_sd;
          if (row.mean_se_formula)
            row.se_formula_sd_ratio = *row.mean_se_formula / *row.mc_sd;
        }
      }
    }
    report.rows.push_back(std::move(row));
  }

  if (total_success == 0)
    raise(ErrorCode::AllReplicationsFailed,
          "no estimator succeeded in any replication; first error: " +
              (report.rows.empty() ? std::string("?") : report.rows[0].first_error));

  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace strateff
