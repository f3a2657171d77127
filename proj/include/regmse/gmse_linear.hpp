#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regmse/multinomial.hpp"
#include "regmse/register.hpp"

namespace regmse {

/// Derivatives of p_i1..p_iK with respect to the free coefficients, K x H.
/// Entry (k, l*J + j) is x_ij p_ik (1 - p_ik) when l = k and -x_ij p_ik p_il
/// otherwise.
Eigen::MatrixXd f_matrix_row(const Eigen::VectorXd& x, const Eigen::VectorXd& p);

struct CacheOptions {
  double ridge = 1e-8;
  /// Build even when the model did not converge.
  bool allow_nonconverged = false;
};

struct CacheDiagnostics {
  double ridge_used = 0.0;
  bool pseudo_inverse = false;
  /// Reciprocal 1-norm condition estimate of -A_bar (0 when singular).
  double rcond = 0.0;
  std::vector<std::string> messages;

  [[nodiscard]] bool used_fallback() const { return ridge_used > 0.0 || pseudo_inverse; }
};

/// Plug-in quantities of the linearised GMSE, computed once per fitted model
/// and reused for any domain.
///
/// Units sharing a covariate row share their F block, so the cache keeps one
/// probability row per distinct covariate pattern instead of N per-unit
/// blocks. `middle()` is
///     M = A_bar^{-1} (sum_i pi_i X_i Sigma_i X_i^T) A_bar^{-T},
/// where A_bar is the Hessian with the sample indicators replaced by pi and
/// Sigma_i is the multinomial covariance over the non-baseline categories.
class PluginCache {
 public:
  [[nodiscard]] const CovariatePatterns& patterns() const { return patterns_; }
  /// P x K fitted probabilities, one row per covariate pattern.
  [[nodiscard]] const ProbabilityMatrix& pattern_probabilities() const { return pattern_p_; }
  [[nodiscard]] const Eigen::MatrixXd& expected_hessian() const { return a_bar_; }
  [[nodiscard]] const Eigen::MatrixXd& middle() const { return middle_; }
  [[nodiscard]] const CacheDiagnostics& diagnostics() const { return diagnostics_; }
  [[nodiscard]] Eigen::Index categories() const { return pattern_p_.cols(); }
  [[nodiscard]] Eigen::Index width() const { return patterns_.rows.cols(); }
  [[nodiscard]] Eigen::Index unit_count() const { return static_cast<Eigen::Index>(patterns_.unit_pattern.size()); }

  /// Per-pattern sums of the domain membership.
  [[nodiscard]] Eigen::VectorXd pattern_weights(const DomainSpec& domain) const;
  /// K x H matrix whose row k is sum_i gamma_i (row k of the unit's F block).
  [[nodiscard]] Eigen::MatrixXd domain_gradient(const DomainSpec& domain) const;

 private:
  friend PluginCache build_plugin_cache(const FittedModel&, const DesignMatrix&, const Eigen::VectorXd&,
                                        const CacheOptions&);

  CovariatePatterns patterns_;
  ProbabilityMatrix pattern_p_;
  Eigen::MatrixXd a_bar_;
  Eigen::MatrixXd middle_;
  CacheDiagnostics diagnostics_;
};

/// `inclusion` holds pi_i for every register unit.
PluginCache build_plugin_cache(const FittedModel& model, const DesignMatrix& design,
                               const Eigen::VectorXd& inclusion, const CacheOptions& options = {});
PluginCache build_plugin_cache(const FittedModel& model, const DesignMatrix& design, const Register& reg,
                               const CacheOptions& options = {});

/// GMSE_k = v_k^T M v_k with v_k the k-th row of domain_gradient. Values
/// that are negative only through rounding (above -1e-9 of their scale) are
/// clamped to zero and noted in `notes`; larger negative values throw.
Eigen::VectorXd gmse_lin(const PluginCache& cache, const DomainSpec& domain,
                         std::vector<std::string>* notes = nullptr);

/// sum_i gamma_i p_ik (1 - p_ik) over the register units, in unit order.
Eigen::VectorXd draw_variance(const ProbabilityMatrix& fitted, const DomainSpec& domain);

/// GMSE of the estimator that imputes a multinomial draw instead of p_hat.
Eigen::VectorXd gmse_draw_variant(const Eigen::VectorXd& lin, const ProbabilityMatrix& fitted,
                                  const DomainSpec& domain);

/// sqrt(gmse) / theta. Throws UndefinedCv when theta <= 0.
double cv(double theta, double gmse);

double cumulated_gmse(const Eigen::VectorXd& per_category);

}  // namespace regmse
