#include "strateff/data.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace strateff {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

void check_binary(const Eigen::VectorXi& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0 && v[i] != 1) {
      raise(ErrorCode::InvalidValue,
            std::string(what) + " must be 0 or 1, got " + std::to_string(v[i]) +
                " at row " + std::to_string(i + 1));
    }
  }
}

}  // namespace

ObservationSet::ObservationSet(Eigen::VectorXd y, Eigen::VectorXi d,
                               Eigen::MatrixXd x,
                               std::optional<Eigen::VectorXi> z)
    : y_(std::move(y)), d_(std::move(d)), x_(std::move(x)), z_(std::move(z)) {
  const Eigen::Index n = y_.size();
  if (n < 1) raise(ErrorCode::InvalidValue, "sample must contain at least one row");
  if (d_.size() != n)
    raise(ErrorCode::DimensionMismatch, "treatment length does not match outcome length");
  if (x_.size() > 0 && x_.rows() != n)
    raise(ErrorCode::DimensionMismatch, "covariate rows do not match outcome length");
  if (x_.size() == 0 && x_.rows() != n) x_.resize(n, 0);
  if (z_ && z_->size() != n)
    raise(ErrorCode::DimensionMismatch, "instrument length does not match outcome length");

  check_binary(d_, "treatment");
  if (z_) check_binary(*z_, "instrument");
  if (!y_.allFinite())
    raise(ErrorCode::InvalidValue, "outcome contains a non-finite value");
  if (x_.size() > 0 && !x_.allFinite())
    raise(ErrorCode::InvalidValue, "covariates contain a non-finite value");

  n_treated_ = d_.cast<std::int64_t>().sum();
  id_ = g_next_id.fetch_add(1, std::memory_order_relaxed);
}

const Eigen::VectorXi& ObservationSet::z() const {
  if (!z_) raise(ErrorCode::MissingInstrument, "sample has no instrument column");
  return *z_;
}

std::vector<Eigen::Index> ObservationSet::arm_rows(int arm) const {
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(arm_count(arm)));
  for (Eigen::Index i = 0; i < n(); ++i)
    if (d_[i] == arm) rows.push_back(i);
  return rows;
}

ObservationSet ObservationSet::subset(const std::vector<Eigen::Index>& rows) const {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(m);
  Eigen::VectorXi d(m);
  Eigen::MatrixXd x(m, num_covariates());
  std::optional<Eigen::VectorXi> z;
  if (z_) z.emplace(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= n()) raise(ErrorCode::DomainError, "subset row out of range");
    y[i] = y_[r];
    d[i] = d_[r];
    x.row(i) = x_.row(r);
    if (z) (*z)[i] = (*z_)[r];
  }
  return ObservationSet(std::move(y), std::move(d), std::move(x), std::move(z));
}

StratificationInfo StratificationInfo::known(double pi_pop, double pi_star) {
  StratificationInfo info{pi_pop, pi_star, PiStarMode::Known};
  info.validate();
  return info;
}

StratificationInfo StratificationInfo::estimated(double pi_pop,
                                                 const ObservationSet& data) {
  StratificationInfo info{pi_pop, data.sample_treated_fraction(),
                          PiStarMode::Estimated};
  info.validate();
  return info;
}

void StratificationInfo::validate() const {
  if (!(pi_pop > 0.0 && pi_pop < 1.0))
    raise(ErrorCode::DomainError, "pi_pop must lie strictly inside (0, 1)");
  if (!(pi_star > 0.0 && pi_star < 1.0))
    raise(ErrorCode::DomainError, "pi_star must lie strictly inside (0, 1)");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, const std::string& column, long row) {
  const std::string t = trim(field);
  if (t.empty())
    raise(ErrorCode::InvalidValue,
          "missing value for column '" + column + "' at row " + std::to_string(row));
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != t.size())
    raise(ErrorCode::InvalidValue, "cannot parse '" + t + "' in column '" + column +
                                       "' at row " + std::to_string(row));
  if (!std::isfinite(v))
    raise(ErrorCode::InvalidValue, "non-finite value in column '" + column +
                                       "' at row " + std::to_string(row));
  return v;
}

int parse_binary(const std::string& field, const std::string& column, long row) {
  double v = parse_number(field, column, row);
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  raise(ErrorCode::InvalidValue, "column '" + column + "' must be 0 or 1, got '" +
                                     trim(field) + "' at row " + std::to_string(row));
}

}  // namespace

ObservationSet ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::FileNotFound, "cannot open '" + path + "'");

  std::string header_line;
  if (!std::getline(in, header_line))
    raise(ErrorCode::SchemaMismatch, "file '" + path + "' has no header row");

  const std::vector<std::string> header = split_csv_line(header_line);
  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t j = 0; j < header.size(); ++j) col_index[trim(header[j])] = j;

  auto require_col = [&](const std::string& name) -> std::size_t {
    auto it = col_index.find(name);
    if (it == col_index.end())
      raise(ErrorCode::SchemaMismatch, "column '" + name + "' not found in header");
    return it->second;
  };

  const std::size_t y_col = require_col(schema.outcome);
  const std::size_t d_col = require_col(schema.treatment);
  std::vector<std::size_t> x_cols;
  for (const auto& name : schema.covariates) x_cols.push_back(require_col(name));
  std::optional<std::size_t> z_col;
  if (schema.instrument) z_col = require_col(*schema.instrument);

  std::vector<double> y;
  std::vector<int> d;
  std::vector<double> x_flat;
  std::vector<int> z;

  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line);
    auto field_at = [&](std::size_t j, const std::string& column) -> const std::string& {
      if (j >= fields.size())
        raise(ErrorCode::InvalidValue, "missing value for column '" + column +
                                           "' at row " + std::to_string(row));
      return fields[j];
    };
    y.push_back(parse_number(field_at(y_col, schema.outcome), schema.outcome, row));
    d.push_back(parse_binary(field_at(d_col, schema.treatment), schema.treatment, row));
    for (std::size_t k = 0; k < x_cols.size(); ++k)
      x_flat.push_back(parse_number(field_at(x_cols[k], schema.covariates[k]),
                                    schema.covariates[k], row));
    if (z_col)
      z.push_back(parse_binary(field_at(*z_col, *schema.instrument), *schema.instrument, row));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  if (n == 0) raise(ErrorCode::InvalidValue, "file '" + path + "' has no data rows");
  const Eigen::Index k = static_cast<Eigen::Index>(x_cols.size());

  Eigen::VectorXd ye = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  Eigen::VectorXi de = Eigen::Map<Eigen::VectorXi>(d.data(), n);
  Eigen::MatrixXd xe(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) xe(i, j) = x_flat[static_cast<std::size_t>(i * k + j)];
  std::optional<Eigen::VectorXi> ze;
  if (z_col) ze = Eigen::Map<Eigen::VectorXi>(z.data(), n);

  ObservationSet data(std::move(ye), std::move(de), std::move(xe), std::move(ze));
  if (data.arm_count(1) == 0)
    raise(ErrorCode::EmptyArm, "treated arm is empty in '" + path + "'");
  if (data.arm_count(0) == 0)
    raise(ErrorCode::EmptyArm, "control arm is empty in '" + path + "'");
  return data;
}

namespace {

std::pair<double, double> mean_sd(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) return {0.0, 0.0};
  const double mean = v.mean();
  if (n == 1) return {mean, 0.0};
  const double ss = (v.array() - mean).square().sum();
  return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

}  // namespace

DataSummary summarize(const ObservationSet& data) {
  DataSummary s;
  s.n = data.n();
  s.n_treated = data.arm_count(1);
  s.n_control = data.arm_count(0);
  s.sample_treated_fraction = data.sample_treated_fraction();
  s.has_instrument = data.has_instrument();
  if (s.has_instrument)
    s.instrument_mean = data.z().cast<double>().mean();

  const auto treated = data.arm_rows(1);
  const auto control = data.arm_rows(0);
  for (Eigen::Index j = 0; j < data.num_covariates(); ++j) {
    const Eigen::VectorXd col = data.x().col(j);
    Eigen::VectorXd col1(static_cast<Eigen::Index>(treated.size()));
    Eigen::VectorXd col0(static_cast<Eigen::Index>(control.size()));
    for (std::size_t i = 0; i < treated.size(); ++i) col1[static_cast<Eigen::Index>(i)] = col[treated[i]];
    for (std::size_t i = 0; i < control.size(); ++i) col0[static_cast<Eigen::Index>(i)] = col[control[i]];
    CovariateSummary cs;
    cs.name = "x" + std::to_string(j + 1);
    std::tie(cs.mean, cs.sd) = mean_sd(col);
    std::tie(cs.mean_treated, cs.sd_treated) = mean_sd(col1);
    std::tie(cs.mean_control, cs.sd_control) = mean_sd(col0);
    s.covariates.push_back(cs);
  }
  return s;
}

const char* estimand_name(Estimand e) {
  switch (e) {
    case Estimand::Ate: return "ate";
    case Estimand::Att: return "att";
    case Estimand::Late: return "late";
  }
  return "?";
}

}  // namespace strateff
