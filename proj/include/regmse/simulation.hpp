#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "regmse/multinomial.hpp"
#include "regmse/register.hpp"
#include "regmse/resampling.hpp"
#include "regmse/truth.hpp"

namespace regmse {

struct SimulatedCovariate {
  Covariate covariate;
  std::vector<double> marginal;  // one probability per level
};

/// Synthetic register design: independent covariates drawn from their
/// marginals, outcomes from a multinomial logit with known coefficients and
/// Bernoulli sampling with a common inclusion probability.
///
/// Scenario files are INI:
///
///     [scenario]
///     name = table4_n100k
///     units = 100000
///     sampling_rate = 0.05
///     seed = 1
///     replicates = 20
///     coefficients = table2_coefficients.csv   ; relative to the file
///     normalise_marginals = true
///     domains = gender;province                ; partitions to report
///     bootstrap = true
///     monte_carlo = true
///
///     [resampling]
///     B = 1000
///     G = 50
///     M = 50
///
///     [outcome]
///     labels = ...
///
///     [covariate.age]
///     kind = categorical
///     levels = ...
///     marginal = ...
///     role = predictor
struct SimulationScenario {
  std::string name;
  Eigen::Index units = 0;
  double sampling_rate = 0.05;
  std::vector<SimulatedCovariate> covariates;
  std::vector<std::string> category_labels;
  Coefficients true_beta;
  std::vector<std::string> domain_columns;
  int replicates = 20;
  ResamplingPlan plan;
  std::uint64_t seed = 1;
  bool run_bootstrap = true;
  bool run_monte_carlo = true;
  std::vector<std::string> notes;

  [[nodiscard]] CovariateSchema schema() const;
  /// Checks marginals (sum to 1 within 1e-9), coefficient shape and finiteness.
  void validate() const;
};

/// `base_dir` resolves a relative coefficients path.
SimulationScenario read_scenario(std::istream& in, const std::string& source_name, const std::string& base_dir);
SimulationScenario read_scenario_file(const std::string& path);

struct SimulatedRegister {
  Register reg;
  CovariateSchema schema;
  SealedTruth truth;
};

/// Replicate `replicate` of the scenario's finite population.
SimulatedRegister generate_register(const SimulationScenario& scenario, std::uint64_t replicate = 0);

struct ComparisonOptions {
  std::optional<int> replicates;  // overrides the scenario's S
  std::optional<bool> bootstrap;
  std::optional<bool> monte_carlo;
  FitOptions fit;
};

/// One CV value of the study, in long format.
struct StudyRow {
  int replicate = 0;
  std::string domain;
  std::size_t category = 0;
  std::string label;
  std::string estimator;  // lin | boot | mc
  double theta_hat = 0.0;
  long long n_k = 0;
  double gmse = 0.0;
  std::optional<double> cv;
};

struct StudySummary {
  std::string domain;
  std::size_t category = 0;
  std::string label;
  std::string estimator;
  int count = 0;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

struct StudyReport {
  std::vector<StudyRow> rows;
  std::vector<StudySummary> summary;
  std::vector<std::string> notes;
  int nonconverged_fits = 0;
  bool used_fallback = false;

  /// Median CV for (domain, category, estimator), if present.
  [[nodiscard]] std::optional<double> median_cv(const std::string& domain, std::size_t category,
                                                const std::string& estimator) const;
};

/// Runs S replicates of: generate, fit, linearised GMSE and, when enabled,
/// bootstrap and Monte-Carlo GMSE, over the full register and every level of
/// the scenario's domain columns.
StudyReport run_comparison(const SimulationScenario& scenario, const ComparisonOptions& options = {});

void write_study_csv(std::ostream& out, const StudyReport& report);
void write_study_summary_csv(std::ostream& out, const StudyReport& report);

/// Linear-interpolation quantile (type 7) of unsorted values.
double quantile(std::vector<double> values, double q);

}  // namespace regmse
