#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace regmse {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CovariateKind { categorical, binary };
enum class CovariateRole { predictor, external_domain, identifier };

struct Covariate {
  std::string name;
  CovariateKind kind = CovariateKind::categorical;
  // Binary covariates carry exactly two labels; the second one codes as 1.
  std::vector<std::string> levels;
  std::size_t reference = 0;
  CovariateRole role = CovariateRole::predictor;

  [[nodiscard]] std::optional<std::size_t> level_index(std::string_view label) const;
  /// Number of design columns this covariate contributes when it is a predictor.
  [[nodiscard]] std::size_t dummy_count() const { return levels.size() - 1; }
};

/// Declared covariates plus the outcome categories.
///
/// Predictors enter the design matrix in declaration order. Each categorical
/// predictor drops its reference level; binary predictors contribute one 0/1
/// column for their second label.
class CovariateSchema {
 public:
  CovariateSchema() = default;
  CovariateSchema(std::vector<Covariate> covariates, std::vector<std::string> category_labels);

  [[nodiscard]] const std::vector<Covariate>& covariates() const { return covariates_; }
  [[nodiscard]] const Covariate* find(std::string_view name) const;
  [[nodiscard]] std::size_t category_count() const { return category_labels_.size(); }
  [[nodiscard]] const std::vector<std::string>& category_labels() const { return category_labels_; }
  /// J = 1 + sum of dummy counts over predictors.
  [[nodiscard]] std::size_t design_width() const;

 private:
  void validate() const;

  std::vector<Covariate> covariates_;
  std::vector<std::string> category_labels_;
};

/// Dictionary-encoded string column. `codes[i]` indexes `dictionary`.
struct ColumnData {
  std::string name;
  std::vector<std::string> dictionary;
  std::vector<std::uint32_t> codes;

  [[nodiscard]] const std::string& value(std::size_t unit) const { return dictionary[codes[unit]]; }
};

/// Unit-level register. Unit order is file order and is the canonical index.
struct Register {
  std::vector<std::string> unit_ids;
  std::vector<ColumnData> columns;      // covariate and domain columns, file order
  std::vector<std::uint8_t> sampled;    // lambda
  std::vector<double> inclusion;        // pi
  std::vector<int> outcome;             // 1..K where sampled, 0 elsewhere

  [[nodiscard]] std::size_t size() const { return unit_ids.size(); }
  [[nodiscard]] std::size_t sample_size() const;
  [[nodiscard]] const ColumnData* column(std::string_view name) const;

  /// Checks the structural invariants against a category count K.
  void validate(std::size_t categories) const;
};

/// Dummy-coded covariates: intercept column followed by predictor dummies.
struct DesignMatrix {
  RowMatrix x;
  std::vector<std::string> column_names;

  [[nodiscard]] Eigen::Index rows() const { return x.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return x.cols(); }
};

enum class DomainKind { full_register, internal, external };

struct DomainSpec {
  std::string name;
  Eigen::VectorXd membership;  // gamma, entries in {0,1}
  DomainKind kind = DomainKind::full_register;
  std::string warning;

  [[nodiscard]] double size() const { return membership.sum(); }
};

DesignMatrix build_design_matrix(const Register& reg, const CovariateSchema& schema);

DomainSpec full_register_domain(const Register& reg);

/// Membership vector of units whose `column` equals `level`.
/// A level that never occurs yields an empty domain carrying a warning.
DomainSpec domain_vector(const Register& reg, const CovariateSchema& schema,
                         std::string_view column, std::string_view level);

/// One domain per level of `column`, in schema level order (or first-seen
/// order for columns the schema does not declare).
std::vector<DomainSpec> domain_partition(const Register& reg, const CovariateSchema& schema,
                                         std::string_view column);

/// theta_k = sum_i gamma_i Y_ik for a one-hot N x K outcome matrix.
Eigen::VectorXd population_total(const DomainSpec& domain, const Eigen::MatrixXd& outcomes);

/// One-hot N x K matrix of the observed outcomes; unsampled rows are zero.
Eigen::MatrixXd observed_one_hot(const Register& reg, std::size_t categories);

Register read_register(std::istream& in, const std::string& source_name,
                       const CovariateSchema& schema);
Register read_register_file(const std::string& path, const CovariateSchema& schema);
void write_register(std::ostream& out, const Register& reg);

}  // namespace regmse
