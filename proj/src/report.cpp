#include "strateff/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace strateff {

namespace {

using nlohmann::ordered_json;

ordered_json opt(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

const char* sampling_name(SamplingScheme s) {
  return s == SamplingScheme::Stratified ? "stratified" : "random";
}

const char* mode_name(PiStarMode m) {
  return m == PiStarMode::Known ? "known" : "estimated";
}

// Fixed 4-significant-digit rendering for the text table.
std::string sig4(double v) {
  if (!std::isfinite(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string sig4(const std::optional<double>& v) {
  return v ? sig4(*v) : std::string("-");
}

// Full-precision rendering for CSV so values round-trip.
std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string full(const std::optional<double>& v) {
  return v ? full(*v) : std::string("");
}

}  // namespace

ordered_json to_json(const EffectEstimate& est) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["estimand"] = estimand_name(est.estimand);
  j["method"] = est.method;
  j["point"] = est.point;
  if (est.influence.empty()) {
    j["se"] = nullptr;
    j["ci"] = nullptr;
    j["se_formula"] = nullptr;
    j["se_influence"] = nullptr;
  } else {
    j["se"] = est.se;
    j["ci"] = {est.ci_low, est.ci_high};
    j["se_formula"] = opt(est.se_formula);
    j["se_influence"] = est.se;
  }
  j["ci_level"] = est.ci_level;
  if (est.se_note) j["se_note"] = *est.se_note;
  if (!est.variance_shares.empty()) {
    ordered_json shares;
    for (const auto& [name, share] : est.variance_shares) shares[name] = share;
    j["variance_shares"] = shares;
  }
  return j;
}

ordered_json to_json(const DataSummary& s) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["n"] = s.n;
  j["n_treated"] = s.n_treated;
  j["n_control"] = s.n_control;
  j["sample_treated_fraction"] = s.sample_treated_fraction;
  if (!s.covariates.empty()) {
    ordered_json cov = ordered_json::array();
    for (const auto& c : s.covariates) {
      ordered_json cj;
      cj["name"] = c.name;
      cj["mean"] = c.mean;
      cj["sd"] = c.sd;
      cj["mean_treated"] = c.mean_treated;
      cj["sd_treated"] = c.sd_treated;
      cj["mean_control"] = c.mean_control;
      cj["sd_control"] = c.sd_control;
      cov.push_back(cj);
    }
    j["covariates"] = cov;
  }
  j["has_instrument"] = s.has_instrument;
  if (s.has_instrument) j["instrument_mean"] = s.instrument_mean;
  return j;
}

ordered_json to_json(const OracleLimits& o) {
  ordered_json j;
  j["e_star_x"] = opt(o.e_star_x);
  j["naive_ate_limit"] = opt(o.naive_ate_limit);
  j["naive_wald_limit"] = opt(o.naive_wald_limit);
  return j;
}

ordered_json to_json(const MonteCarloReport& report) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  ordered_json meta;
  meta["design"] = report.design;
  meta["n"] = report.n;
  meta["replications"] = report.replications;
  meta["pi_pop"] = report.pi_pop;
  meta["pi_star"] = report.pi_star;
  meta["pi_star_mode"] = mode_name(report.pi_star_mode);
  meta["sampling"] = sampling_name(report.sampling);
  meta["seed"] = report.seed;
  meta["ci_level"] = report.ci_level;
  meta["oracle_limits"] = to_json(report.oracles);
  j["metadata"] = meta;

  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json row;
    row["estimator"] = r.id;
    row["estimand"] = estimand_name(r.estimand);
    row["truth"] = r.truth;
    row["n_success"] = r.n_success;
    row["failures"] = r.failures;
    if (!r.first_error.empty()) row["first_error"] = r.first_error;
    row["mean_point"] = opt(r.mean_point);
    row["bias"] = opt(r.bias);
    row["mc_sd"] = opt(r.mc_sd);
    if (r.sd_undefined) row["sd_undefined"] = true;
    row["mean_se"] = opt(r.mean_se);
    row["mean_se_formula"] = opt(r.mean_se_formula);
    row["se_sd_ratio"] = opt(r.se_sd_ratio);
    row["se_formula_sd_ratio"] = opt(r.se_formula_sd_ratio);
    row["coverage95"] = opt(r.coverage95);
    rows.push_back(row);
  }
  j["estimators"] = rows;
  return j;
}

std::string report_csv(const MonteCarloReport& report) {
  std::ostringstream out;
  out << "estimator,estimand,truth,n_success,failures,mean_point,bias,mc_sd,"
         "mean_se,mean_se_formula,se_sd_ratio,se_formula_sd_ratio,coverage95\n";
  for (const auto& r : report.rows) {
    out << r.id << ',' << estimand_name(r.estimand) << ',' << full(r.truth) << ','
        << r.n_success << ',' << r.failures << ',' << full(r.mean_point) << ','
        << full(r.bias) << ',' << full(r.mc_sd) << ',' << full(r.mean_se) << ','
        << full(r.mean_se_formula) << ',' << full(r.se_sd_ratio) << ','
        << full(r.se_formula_sd_ratio) << ',' << full(r.coverage95) << '\n';
  }
  return out.str();
}

std::string report_text(const MonteCarloReport& report) {
  std::ostringstream out;
  out << "design " << report.design << "  n=" << report.n
      << "  R=" << report.replications << "  pi=" << sig4(report.pi_pop)
      << "  pi*=" << sig4(report.pi_star) << " (" << mode_name(report.pi_star_mode)
      << ")  sampling=" << sampling_name(report.sampling) << "  seed=" << report.seed
      << "\n";
  if (report.oracles.naive_ate_limit)
    out << "oracle naive-ATE limit: " << sig4(*report.oracles.naive_ate_limit) << "\n";
  if (report.oracles.naive_wald_limit)
    out << "oracle naive-Wald limit: " << sig4(*report.oracles.naive_wald_limit) << "\n";

  const std::vector<std::string> headers = {"estimator", "truth", "mean",     "bias",
                                            "mc_sd",     "se",    "se_form",  "se/sd",
                                            "cover",     "fail"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : report.rows) {
    cells.push_back({r.id, sig4(r.truth), sig4(r.mean_point), sig4(r.bias), sig4(r.mc_sd),
                     sig4(r.mean_se), sig4(r.mean_se_formula), sig4(r.se_sd_ratio),
                     sig4(r.coverage95), std::to_string(r.failures)});
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      out << row[c];
      for (std::size_t p = row[c].size(); p < width[c]; ++p) out << ' ';
    }
    out << '\n';
  };
  emit_row(headers);
  for (const auto& row : cells) emit_row(row);
  out << "wall time: " << sig4(report.wall_time_seconds) << " s\n";
  return out.str();
}

std::string emit_report(const MonteCarloReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return to_json(report).dump(2) + "\n";
    case ReportFormat::Csv: return report_csv(report);
    case ReportFormat::Text: return report_text(report);
  }
  raise(ErrorCode::ConfigError, "unknown report format");
}

}  // namespace strateff
