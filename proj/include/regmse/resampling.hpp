#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regmse/multinomial.hpp"
#include "regmse/register.hpp"
#include "regmse/truth.hpp"

namespace regmse {

struct ResamplingPlan {
  int B = 1000;  // bootstrap replicates
  int G = 100;   // sample-membership replicates
  int M = 100;   // outcome replicates per membership replicate
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  /// Bootstrap variance about the replicate mean instead of the original estimate.
  bool centre_on_replicate_mean = false;
  /// Hard error when more than this share of replicates is dropped.
  double max_drop_fraction = 0.05;

  void validate() const;
};

/// Counter-based seed for replicate `index` of `stream`; independent of the
/// order in which replicates are run.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

unsigned resolve_threads(unsigned requested);

/// Runs body(0..count-1) on up to `threads` workers. The first exception
/// thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

/// mt19937_64 with fixed integer-to-real conversions, so draws do not depend
/// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Index drawn from probabilities p[0..size-1].
  int categorical(const double* p, Eigen::Index size, Eigen::Index stride = 1);

 private:
  std::mt19937_64 engine_;
};

struct ReplicateEstimate {
  Eigen::MatrixXd gmse;    // D x K
  Eigen::MatrixXd centre;  // D x K: theta_hat (bootstrap) or sum gamma p (Monte Carlo)
  int attempted = 0;
  int dropped = 0;
  std::vector<std::string> notes;
  /// Per-replicate D x K totals, kept only when requested.
  std::vector<Eigen::MatrixXd> replicates;
};

/// Non-parametric bootstrap: each replicate resamples the n sampled units with
/// replacement, refits and predicts the totals over all N units.
/// gmse = (1/B) sum_b (theta*_b - theta_hat)^2.
/// Replicates whose refit fails (category lost, no convergence) are dropped
/// and counted.
ReplicateEstimate bootstrap_gmse(const DesignMatrix& design, const Register& reg, const FittedModel& original,
                                 const std::vector<DomainSpec>& domains, const ResamplingPlan& plan,
                                 const FitOptions& fit_options = {}, bool keep_replicates = false);

/// Monte-Carlo benchmark on a simulated register: G draws of lambda ~ Bern(pi),
/// M draws of the sampled outcomes from the true probabilities per lambda,
/// a refit each time, and the nested mean of (sum gamma p_hat - sum gamma p)^2.
/// `warm_start`, when given, seeds every refit.
ReplicateEstimate mc_oracle(const DesignMatrix& design, const Register& reg, const SealedTruth& truth,
                            const std::vector<DomainSpec>& domains, const ResamplingPlan& plan,
                            const FitOptions& fit_options = {}, const Coefficients* warm_start = nullptr,
                            bool keep_replicates = false);

}  // namespace regmse
