#include "regmse/register.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "regmse/csv.hpp"
#include "regmse/error.hpp"

namespace regmse {

namespace {

constexpr std::string_view kUnitId = "unit_id";
constexpr std::string_view kSampled = "sampled";
constexpr std::string_view kPi = "pi";
constexpr std::string_view kOutcome = "outcome";

}  // namespace

std::optional<std::size_t> Covariate::level_index(std::string_view label) const {
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (levels[l] == label) return l;
  }
  return std::nullopt;
}

CovariateSchema::CovariateSchema(std::vector<Covariate> covariates,
                                 std::vector<std::string> category_labels)
    : covariates_(std::move(covariates)), category_labels_(std::move(category_labels)) {
  validate();
}

void CovariateSchema::validate() const {
  if (category_labels_.size() < 2) {
    throw InputError("schema: the outcome needs at least two categories");
  }
  std::set<std::string> names;
  for (const auto& cov : covariates_) {
    if (cov.name.empty()) throw InputError("schema: covariate with empty name");
    if (!names.insert(cov.name).second) {
      throw InputError(fmt::format("schema: duplicate covariate '{}'", cov.name));
    }
    if (cov.name == kUnitId || cov.name == kSampled || cov.name == kPi || cov.name == kOutcome) {
      throw InputError(fmt::format("schema: '{}' is a reserved column name", cov.name));
    }
    if (cov.role == CovariateRole::identifier) continue;
    if (cov.kind == CovariateKind::binary && cov.levels.size() != 2) {
      throw InputError(fmt::format("schema: binary covariate '{}' needs exactly two levels", cov.name));
    }
    if (cov.levels.size() < 2) {
      throw InputError(fmt::format("schema: categorical covariate '{}' needs at least two levels", cov.name));
    }
    if (cov.reference >= cov.levels.size()) {
      throw InputError(fmt::format("schema: reference level of '{}' is out of range", cov.name));
    }
    if (cov.kind == CovariateKind::binary && cov.reference != 0) {
      throw InputError(fmt::format("schema: binary covariate '{}' uses its first level as reference", cov.name));
    }
    std::set<std::string> seen(cov.levels.begin(), cov.levels.end());
    if (seen.size() != cov.levels.size()) {
      throw InputError(fmt::format("schema: covariate '{}' repeats a level", cov.name));
    }
  }
}

const Covariate* CovariateSchema::find(std::string_view name) const {
  for (const auto& cov : covariates_) {
    if (cov.name == name) return &cov;
  }
  return nullptr;
}

std::size_t CovariateSchema::design_width() const {
  std::size_t width = 1;
  for (const auto& cov : covariates_) {
    if (cov.role == CovariateRole::predictor) width += cov.dummy_count();
  }
  return width;
}

std::size_t Register::sample_size() const {
  return static_cast<std::size_t>(std::count(sampled.begin(), sampled.end(), std::uint8_t{1}));
}

const ColumnData* Register::column(std::string_view name) const {
  for (const auto& col : columns) {
    if (col.name == name) return &col;
  }
  return nullptr;
}

void Register::validate(std::size_t categories) const {
  const std::size_t n_units = unit_ids.size();
  if (n_units == 0) throw InputError("register is empty");
  if (sampled.size() != n_units || inclusion.size() != n_units || outcome.size() != n_units) {
    throw InputError("register columns have inconsistent lengths");
  }
  for (const auto& col : columns) {
    if (col.codes.size() != n_units) {
      throw InputError(fmt::format("register column '{}' has the wrong length", col.name));
    }
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i < n_units; ++i) {
    if (!(inclusion[i] > 0.0 && inclusion[i] <= 1.0)) {
      throw InputError(fmt::format("unit {} ('{}'): inclusion probability {} outside (0,1]", i,
                                   unit_ids[i], inclusion[i]));
    }
    if (sampled[i] > 1) throw InputError(fmt::format("unit {}: sampled flag must be 0 or 1", i));
    if (sampled[i]) {
      ++n;
      if (outcome[i] < 1 || outcome[i] > static_cast<int>(categories)) {
        throw InputError(fmt::format("unit {} ('{}'): sampled unit needs an outcome in 1..{}", i,
                                     unit_ids[i], categories));
      }
    } else if (outcome[i] != 0) {
      throw InputError(fmt::format("unit {} ('{}'): outcome present for an unsampled unit", i,
                                   unit_ids[i]));
    }
  }
  if (n == 0) throw InputError("register has no sampled units");
}

DesignMatrix build_design_matrix(const Register& reg, const CovariateSchema& schema) {
  const std::size_t n_units = reg.size();
  if (n_units == 0) throw InputError("cannot build a design matrix for an empty register");

  DesignMatrix design;
  design.x.setZero(static_cast<Eigen::Index>(n_units), static_cast<Eigen::Index>(schema.design_width()));
  design.x.col(0).setOnes();
  design.column_names.push_back("(Intercept)");

  Eigen::Index offset = 1;
  for (const auto& cov : schema.covariates()) {
    if (cov.role != CovariateRole::predictor) continue;
    const ColumnData* col = reg.column(cov.name);
    if (col == nullptr) {
      throw InputError(fmt::format("register lacks predictor column '{}'", cov.name));
    }
    // dictionary code -> dummy column offset, or -1 for the reference level
    std::vector<Eigen::Index> target(col->dictionary.size(), -1);
    std::vector<bool> known(col->dictionary.size(), false);
    for (std::size_t code = 0; code < col->dictionary.size(); ++code) {
      if (auto level = cov.level_index(col->dictionary[code])) {
        known[code] = true;
        if (*level != cov.reference) {
          target[code] = offset + static_cast<Eigen::Index>(*level < cov.reference ? *level : *level - 1);
        }
      }
    }
    for (std::size_t i = 0; i < n_units; ++i) {
      const auto code = col->codes[i];
      if (!known[code]) {
        throw InputError(fmt::format("unit {} ('{}') column '{}': unknown level '{}'", i, reg.unit_ids[i],
                                     cov.name, col->dictionary[code]));
      }
      if (target[code] >= 0) design.x(static_cast<Eigen::Index>(i), target[code]) = 1.0;
    }
    for (std::size_t l = 0; l < cov.levels.size(); ++l) {
      if (l == cov.reference) continue;
      design.column_names.push_back(cov.kind == CovariateKind::binary
                                        ? cov.name
                                        : fmt::format("{}::{}", cov.name, cov.levels[l]));
    }
    offset += static_cast<Eigen::Index>(cov.dummy_count());
  }
  return design;
}

DomainSpec full_register_domain(const Register& reg) {
  DomainSpec domain;
  domain.name = "full";
  domain.kind = DomainKind::full_register;
  domain.membership = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(reg.size()));
  return domain;
}

DomainSpec domain_vector(const Register& reg, const CovariateSchema& schema, std::string_view column,
                         std::string_view level) {
  const ColumnData* col = reg.column(column);
  if (col == nullptr) throw InputError(fmt::format("unknown domain column '{}'", column));

  DomainSpec domain;
  domain.name = fmt::format("{}={}", column, level);
  const Covariate* cov = schema.find(column);
  domain.kind = (cov != nullptr && cov->role == CovariateRole::predictor) ? DomainKind::internal
                                                                          : DomainKind::external;
  domain.membership = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(reg.size()));

  std::optional<std::uint32_t> wanted;
  for (std::size_t code = 0; code < col->dictionary.size(); ++code) {
    if (col->dictionary[code] == level) wanted = static_cast<std::uint32_t>(code);
  }
  if (!wanted) {
    domain.warning = fmt::format("level '{}' does not occur in column '{}'", level, column);
    return domain;
  }
  for (std::size_t i = 0; i < reg.size(); ++i) {
    if (col->codes[i] == *wanted) domain.membership(static_cast<Eigen::Index>(i)) = 1.0;
  }
  return domain;
}

std::vector<DomainSpec> domain_partition(const Register& reg, const CovariateSchema& schema,
                                         std::string_view column) {
  const ColumnData* col = reg.column(column);
  if (col == nullptr) throw InputError(fmt::format("unknown domain column '{}'", column));
  std::vector<std::string> levels;
  if (const Covariate* cov = schema.find(column); cov != nullptr && !cov->levels.empty()) {
    levels = cov->levels;
  } else {
    levels = col->dictionary;
  }
  std::vector<DomainSpec> out;
  out.reserve(levels.size());
  for (const auto& level : levels) out.push_back(domain_vector(reg, schema, column, level));
  return out;
}

Eigen::VectorXd population_total(const DomainSpec& domain, const Eigen::MatrixXd& outcomes) {
  return outcomes.transpose() * domain.membership;
}

Eigen::MatrixXd observed_one_hot(const Register& reg, std::size_t categories) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(reg.size()),
                                            static_cast<Eigen::Index>(categories));
  for (std::size_t i = 0; i < reg.size(); ++i) {
    if (reg.sampled[i] && reg.outcome[i] >= 1) {
      y(static_cast<Eigen::Index>(i), reg.outcome[i] - 1) = 1.0;
    }
  }
  return y;
}

Register read_register(std::istream& in, const std::string& source_name, const CovariateSchema& schema) {
  const csv::Table table = csv::read(in, source_name);
  const int id_col = table.column(kUnitId);
  const int sampled_col = table.column(kSampled);
  const int pi_col = table.column(kPi);
  const int outcome_col = table.column(kOutcome);
  for (auto [name, idx] : {std::pair{kUnitId, id_col}, std::pair{kSampled, sampled_col},
                           std::pair{kPi, pi_col}, std::pair{kOutcome, outcome_col}}) {
    if (idx < 0) throw InputError(fmt::format("{}: missing required column '{}'", source_name, name));
  }
  for (const auto& cov : schema.covariates()) {
    if (cov.role != CovariateRole::identifier && table.column(cov.name) < 0) {
      throw InputError(fmt::format("{}: missing schema column '{}'", source_name, cov.name));
    }
  }

  Register reg;
  const std::size_t n_units = table.rows.size();
  std::vector<int> data_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const int ci = static_cast<int>(c);
    if (ci == id_col || ci == sampled_col || ci == pi_col || ci == outcome_col) continue;
    data_cols.push_back(ci);
    ColumnData col;
    col.name = table.header[c];
    col.codes.reserve(n_units);
    reg.columns.push_back(std::move(col));
  }
  std::vector<std::unordered_map<std::string, std::uint32_t>> lookup(data_cols.size());

  reg.unit_ids.reserve(n_units);
  reg.sampled.reserve(n_units);
  reg.inclusion.reserve(n_units);
  reg.outcome.reserve(n_units);
  const auto K = static_cast<long long>(schema.category_count());
  for (std::size_t r = 0; r < n_units; ++r) {
    const auto& row = table.rows[r];
    const auto where = fmt::format("{}:{}", source_name, table.line_numbers[r]);
    reg.unit_ids.push_back(row[static_cast<std::size_t>(id_col)]);

    const auto flag = csv::parse_int(row[static_cast<std::size_t>(sampled_col)], where + " sampled");
    if (flag != 0 && flag != 1) throw InputError(where + ": sampled must be 0 or 1");
    reg.sampled.push_back(static_cast<std::uint8_t>(flag));
    reg.inclusion.push_back(csv::parse_double(row[static_cast<std::size_t>(pi_col)], where + " pi"));

    const auto& outcome_text = row[static_cast<std::size_t>(outcome_col)];
    if (outcome_text.empty()) {
      if (flag == 1) throw InputError(where + ": sampled unit without outcome");
      reg.outcome.push_back(0);
    } else {
      if (flag == 0) throw InputError(where + ": outcome given for an unsampled unit");
      const auto k = csv::parse_int(outcome_text, where + " outcome");
      if (k < 1 || k > K) throw InputError(fmt::format("{}: outcome {} outside 1..{}", where, k, K));
      reg.outcome.push_back(static_cast<int>(k));
    }

    for (std::size_t c = 0; c < data_cols.size(); ++c) {
      const auto& value = row[static_cast<std::size_t>(data_cols[c])];
      auto& col = reg.columns[c];
      auto [it, inserted] = lookup[c].try_emplace(value, static_cast<std::uint32_t>(col.dictionary.size()));
      if (inserted) col.dictionary.push_back(value);
      col.codes.push_back(it->second);
    }
  }
  reg.validate(schema.category_count());
  return reg;
}

Register read_register_file(const std::string& path, const CovariateSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open register '{}'", path));
  return read_register(in, path, schema);
}

void write_register(std::ostream& out, const Register& reg) {
  std::vector<std::string> header{std::string(kUnitId)};
  for (const auto& col : reg.columns) header.push_back(col.name);
  header.insert(header.end(), {std::string(kSampled), std::string(kPi), std::string(kOutcome)});

  std::vector<std::vector<std::string>> rows;
  rows.reserve(reg.size());
  for (std::size_t i = 0; i < reg.size(); ++i) {
    std::vector<std::string> row{reg.unit_ids[i]};
    for (const auto& col : reg.columns) row.push_back(col.value(i));
    row.push_back(reg.sampled[i] ? "1" : "0");
    row.push_back(csv::format_double(reg.inclusion[i]));
    row.push_back(reg.sampled[i] ? std::to_string(reg.outcome[i]) : std::string());
    rows.push_back(std::move(row));
  }
  csv::write(out, header, rows);
}

}  // namespace regmse
