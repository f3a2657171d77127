#pragma once

#include <vector>

#include <Eigen/Dense>

#include "regmse/multinomial.hpp"
#include "regmse/register.hpp"

namespace regmse::kron {

// Stacked (Kronecker) formulation of the linearised GMSE.
//
// Every unit contributes K consecutive rows, one per category, so stacked
// vectors have length T = N * K. Parameters are ordered covariate-major,
// h = j * (K-1) + l, which is the order produced by x_i (x) I_K once the
// baseline column is dropped. The standard engine orders category-major;
// `standard_index` maps between the two.

/// Standard (category-major) index of KF parameter h.
Eigen::Index standard_index(Eigen::Index h, Eigen::Index categories, Eigen::Index width);

/// Coefficients as a covariate-major H-vector.
Eigen::VectorXd stack_coefficients(const Coefficients& beta);

/// Rows first..first+count of the stacked design: for unit i the K x H block
/// x_i^T (x) I_K restricted to the K-1 free categories. Baseline rows are zero.
Eigen::MatrixXd stacked_design(const RowMatrix& x, Eigen::Index categories, Eigen::Index first, Eigen::Index count);

/// pi (x) 1_K for units first..first+count.
Eigen::VectorXd stack_units(const Eigen::VectorXd& per_unit, Eigen::Index categories, Eigen::Index first,
                            Eigen::Index count);

/// One-hot outcomes as a T-vector (rows of `y` concatenated).
Eigen::VectorXd stack_rows(const Eigen::MatrixXd& y);

/// p_hat = e / d_plus with e = exp(X_dot beta) and d_plus the per-unit sum.
Eigen::VectorXd kf_probabilities(const Eigen::MatrixXd& xdot, const Eigen::VectorXd& beta, Eigen::Index categories);

/// Estimating equations G^T lambda_dot with G = X_dot # (y - p).
Eigen::VectorXd kf_score(const Eigen::MatrixXd& xdot, const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                         const Eigen::VectorXd& lambda_dot);

/// Delta = dp/dbeta, T x H.
Eigen::MatrixXd kf_derivative(const Eigen::MatrixXd& xdot, const Eigen::VectorXd& p, Eigen::Index categories);

/// A = -X_dot^T diag(pi_dot) Delta (covariate-major order).
Eigen::MatrixXd kf_hessian(const Eigen::MatrixXd& xdot, const Eigen::VectorXd& p, const Eigen::VectorXd& pi_dot,
                           Eigen::Index categories);

struct KroneckerOptions {
  /// Units per block; 0 picks the largest block within `memory_budget_bytes`,
  /// capped at 65,536 units.
  Eigen::Index block_units = 0;
  std::size_t memory_budget_bytes = std::size_t{256} << 20;
};

/// Register-level inputs of the stacked computation.
class KroneckerWorkspace {
 public:
  KroneckerWorkspace(RowMatrix x, Eigen::Index categories, Eigen::VectorXd inclusion,
                     const std::vector<DomainSpec>& domains, KroneckerOptions options = {});

  [[nodiscard]] Eigen::Index unit_count() const { return x_.rows(); }
  [[nodiscard]] Eigen::Index categories() const { return categories_; }
  [[nodiscard]] Eigen::Index width() const { return x_.cols(); }
  [[nodiscard]] Eigen::Index parameter_count() const { return x_.cols() * (categories_ - 1); }
  [[nodiscard]] Eigen::Index domain_count() const { return gamma_.cols(); }
  [[nodiscard]] Eigen::Index block_units() const { return block_units_; }

  [[nodiscard]] const RowMatrix& design() const { return x_; }
  [[nodiscard]] const Eigen::VectorXd& inclusion() const { return pi_; }

  /// Gamma rows for units first..first+count: (count*K) x (D*K), column
  /// d*K + k selects the category-k cells of domain d.
  [[nodiscard]] Eigen::MatrixXd selector(Eigen::Index first, Eigen::Index count) const;

 private:
  RowMatrix x_;
  Eigen::Index categories_;
  Eigen::VectorXd pi_;
  Eigen::MatrixXd gamma_;  // N x D memberships
  Eigen::Index block_units_;
};

struct KroneckerResult {
  Eigen::MatrixXd totals;  // D x K, Gamma^T p_hat
  Eigen::MatrixXd gmse;    // D x K
  Eigen::MatrixXd hessian; // H x H, covariate-major
};

/// Diagonal of Gamma^T Delta A^{-1} (X_dot^T diag(pi_dot) Sigma_dot X_dot) A^{-T} Delta^T Gamma,
/// accumulated block by block over units before the final sandwich.
KroneckerResult kf_gmse(const KroneckerWorkspace& workspace, const Coefficients& beta);

}  // namespace regmse::kron
