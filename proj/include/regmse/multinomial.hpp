#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regmse/register.hpp"

namespace regmse {

/// Multinomial-logit coefficients with the last category as baseline.
///
/// Only the (K-1) x J free block is stored. Vectorised parameters use
/// category-major order: index h = l * J + j for category l < K-1 and design
/// column j, giving H = (K-1) * J free parameters.
class Coefficients {
 public:
  Coefficients() = default;
  explicit Coefficients(Eigen::MatrixXd free_block);

  static Coefficients zeros(Eigen::Index categories, Eigen::Index width);
  static Coefficients from_vector(const Eigen::VectorXd& theta, Eigen::Index categories, Eigen::Index width);
  /// Builds from a K x J matrix whose last row must be zero.
  static Coefficients from_expanded(const Eigen::MatrixXd& full);

  [[nodiscard]] const Eigen::MatrixXd& free_block() const { return free_; }
  [[nodiscard]] Eigen::MatrixXd expanded() const;
  [[nodiscard]] Eigen::VectorXd as_vector() const;
  [[nodiscard]] Eigen::Index categories() const { return free_.rows() + 1; }
  [[nodiscard]] Eigen::Index width() const { return free_.cols(); }
  [[nodiscard]] Eigen::Index parameter_count() const { return free_.size(); }

 private:
  Eigen::MatrixXd free_;
};

/// N x K matrix of category probabilities; rows sum to one.
using ProbabilityMatrix = Eigen::MatrixXd;

/// Rows of a design with per-row weights and weighted outcome counts.
///
/// A unit-level view has one row per unit, weight lambda_i and counts
/// lambda_i * y_i. Grouping units that share a covariate row gives the same
/// likelihood, score and Hessian with far fewer rows.
struct WeightedRows {
  RowMatrix x;              // R x J
  Eigen::VectorXd weight;   // R
  Eigen::MatrixXd counts;   // R x K
};

/// Distinct covariate rows of a design and the row each unit maps to.
struct CovariatePatterns {
  RowMatrix rows;                    // P x J
  std::vector<Eigen::Index> unit_pattern;  // N entries in [0, P)

  [[nodiscard]] Eigen::Index count() const { return rows.rows(); }
};

CovariatePatterns find_patterns(const RowMatrix& x);

/// Collapses units onto their patterns. `weight[i]` multiplies unit i (0 drops
/// it); `outcome[i]` is 1..K and only read where the weight is positive.
WeightedRows aggregate(const CovariatePatterns& patterns, const Eigen::VectorXd& weight,
                       const std::vector<int>& outcome, Eigen::Index categories);

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 100;
  double ridge = 1e-8;
};

/// Newton iterations on a set of weighted rows.
struct FitResult {
  Coefficients coefficients;
  int iterations = 0;
  double final_score_norm = 0.0;
  double ridge_used = 0.0;
  bool converged = false;
  std::vector<std::string> diagnostics;
};

struct FittedModel {
  Coefficients coefficients;
  ProbabilityMatrix fitted_probabilities;  // all N register units
  int iterations = 0;
  double final_score_norm = 0.0;
  double ridge_used = 0.0;
  bool converged = false;
  std::vector<std::string> diagnostics;

  [[nodiscard]] bool used_fallback() const { return ridge_used > 0.0; }
};

/// Stabilised softmax with a zero linear predictor for the baseline.
/// Throws NumericalError naming the unit and category of a non-finite
/// linear predictor.
ProbabilityMatrix probabilities(const RowMatrix& x, const Coefficients& beta);
inline ProbabilityMatrix probabilities(const DesignMatrix& design, const Coefficients& beta) {
  return probabilities(design.x, beta);
}

double log_likelihood(const DesignMatrix& design, const Eigen::MatrixXd& y, const Eigen::VectorXd& lambda,
                      const Coefficients& beta);
Eigen::VectorXd score(const DesignMatrix& design, const Eigen::MatrixXd& y, const Eigen::VectorXd& lambda,
                      const Coefficients& beta);
/// Second derivative of the log-likelihood; `weights` is lambda for the
/// fitting Hessian or pi for its expectation over the design.
Eigen::MatrixXd hessian(const DesignMatrix& design, const Eigen::VectorXd& weights, const Coefficients& beta);

double log_likelihood(const WeightedRows& rows, const Coefficients& beta);
Eigen::VectorXd score(const WeightedRows& rows, const Coefficients& beta);
/// Hessian for given per-row weights and probabilities (rows of `p`).
Eigen::MatrixXd hessian(const RowMatrix& x, const Eigen::VectorXd& weights, const ProbabilityMatrix& p);

/// Maximum-likelihood fit. Throws SeparationError when a category has no
/// weight; nonconvergence is reported through `converged`.
FitResult fit_rows(const WeightedRows& rows, const FitOptions& options = {});
/// Same, starting Newton from `start` instead of the marginal log-odds.
FitResult fit_rows(const WeightedRows& rows, const FitOptions& options, const Coefficients& start);

/// Fits on the units with lambda_i = 1 and predicts probabilities for all N.
FittedModel fit(const DesignMatrix& design, const Eigen::MatrixXd& y, const Eigen::VectorXd& lambda,
                const FitOptions& options = {});
FittedModel fit(const DesignMatrix& design, const Register& reg, Eigen::Index categories,
                const FitOptions& options = {});

/// Builds a FittedModel for known coefficients (no fitting).
FittedModel model_from_coefficients(const DesignMatrix& design, const Coefficients& beta);

/// theta_hat_k = sum_i gamma_i p_hat_ik.
Eigen::VectorXd predict_totals(const FittedModel& model, const DomainSpec& domain);

/// Coefficient table: one row per design column, one column per category,
/// baseline column present and zero.
void write_coefficients(std::ostream& out, const Coefficients& beta, const std::vector<std::string>& column_names,
                        const std::vector<std::string>& category_labels);

struct CoefficientTable {
  Coefficients coefficients;
  std::vector<std::string> column_names;
  std::vector<std::string> category_labels;
};

CoefficientTable read_coefficients(std::istream& in, const std::string& source_name);
CoefficientTable read_coefficients_file(const std::string& path);

}  // namespace regmse
