#include "regmse/resampling.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "regmse/error.hpp"
#include "truth_access.hpp"

namespace regmse {

void ResamplingPlan::validate() const {
  if (B < 1 || G < 1 || M < 1) throw InputError("B, G and M must be at least 1");
  if (!(max_drop_fraction >= 0.0 && max_drop_fraction < 1.0)) throw InputError("max_drop_fraction must be in [0,1)");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  // rejection sampling for an unbiased draw
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

int Rng::categorical(const double* p, Eigen::Index size, Eigen::Index stride) {
  const double u = uniform();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < size - 1; ++k) {
    acc += p[k * stride];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(size - 1);
}

namespace {

constexpr std::uint64_t kBootstrapStream = 0xb0075;
constexpr std::uint64_t kMembershipStream = 0x1a4bda;
constexpr std::uint64_t kOutcomeStream = 0x0c7c0e;

// Pattern bookkeeping shared by the replicate loops.
struct PatternView {
  CovariatePatterns patterns;
  Eigen::MatrixXd domain_weights;  // P x D

  PatternView(const DesignMatrix& design, const std::vector<DomainSpec>& domains)
      : patterns(find_patterns(design.x)) {
    domain_weights = Eigen::MatrixXd::Zero(patterns.count(), static_cast<Eigen::Index>(domains.size()));
    for (std::size_t d = 0; d < domains.size(); ++d) {
      if (domains[d].membership.size() != design.rows()) throw std::invalid_argument("domain does not match register");
      for (std::size_t i = 0; i < patterns.unit_pattern.size(); ++i) {
        domain_weights(patterns.unit_pattern[i], static_cast<Eigen::Index>(d)) +=
            domains[d].membership(static_cast<Eigen::Index>(i));
      }
    }
  }

  // D x K totals sum_i gamma_i p_i for coefficients beta.
  [[nodiscard]] Eigen::MatrixXd totals(const Coefficients& beta) const {
    return domain_weights.transpose() * probabilities(patterns.rows, beta);
  }
};

// Weighted rows over the patterns touched by (unit, multiplicity, outcome).
class RowBuilder {
 public:
  RowBuilder(const PatternView& view, Eigen::Index categories)
      : view_(view), categories_(categories), slot_(static_cast<std::size_t>(view.patterns.count()), -1) {}

  void add(std::size_t unit, double weight, int outcome) {
    const Eigen::Index p = view_.patterns.unit_pattern[unit];
    auto& s = slot_[static_cast<std::size_t>(p)];
    if (s < 0) {
      s = static_cast<Eigen::Index>(used_.size());
      used_.push_back(p);
      weight_.push_back(0.0);
      counts_.emplace_back(Eigen::VectorXd::Zero(categories_));
    }
    weight_[static_cast<std::size_t>(s)] += weight;
    counts_[static_cast<std::size_t>(s)](outcome - 1) += weight;
  }

  WeightedRows finish() {
    WeightedRows rows;
    const auto R = static_cast<Eigen::Index>(used_.size());
    rows.x.resize(R, view_.patterns.rows.cols());
    rows.weight.resize(R);
    rows.counts.resize(R, categories_);
    for (Eigen::Index r = 0; r < R; ++r) {
      rows.x.row(r) = view_.patterns.rows.row(used_[static_cast<std::size_t>(r)]);
      rows.weight(r) = weight_[static_cast<std::size_t>(r)];
      rows.counts.row(r) = counts_[static_cast<std::size_t>(r)].transpose();
    }
    for (const auto p : used_) slot_[static_cast<std::size_t>(p)] = -1;
    used_.clear();
    weight_.clear();
    counts_.clear();
    return rows;
  }

 private:
  const PatternView& view_;
  Eigen::Index categories_;
  std::vector<Eigen::Index> slot_;
  std::vector<Eigen::Index> used_;
  std::vector<double> weight_;
  std::vector<Eigen::VectorXd> counts_;
};

// Refit; nullopt when the replicate has to be dropped.
std::optional<Coefficients> refit(const WeightedRows& rows, const FitOptions& options, const Coefficients* start,
                                  std::string& reason) {
  try {
    FitResult r = start ? fit_rows(rows, options, *start) : fit_rows(rows, options);
    if (!r.converged) {
      reason = fmt::format("no convergence (score norm {:.3e})", r.final_score_norm);
      return std::nullopt;
    }
    return std::move(r.coefficients);
  } catch (const SeparationError& e) {
    reason = e.what();
  } catch (const NumericalError& e) {
    reason = e.what();
  }
  return std::nullopt;
}

void enforce_drop_policy(const ReplicateEstimate& est, const ResamplingPlan& plan, const char* what) {
  if (est.dropped > plan.max_drop_fraction * est.attempted) {
    throw NumericalError(fmt::format("{}: {} of {} replicates dropped (limit {:.0f}%)", what, est.dropped,
                                     est.attempted, 100.0 * plan.max_drop_fraction));
  }
}

}  // namespace

ReplicateEstimate bootstrap_gmse(const DesignMatrix& design, const Register& reg, const FittedModel& original,
                                 const std::vector<DomainSpec>& domains, const ResamplingPlan& plan,
                                 const FitOptions& fit_options, bool keep_replicates) {
  plan.validate();
  if (reg.size() != static_cast<std::size_t>(design.rows())) throw std::invalid_argument("design and register differ");
  const Eigen::Index K = original.coefficients.categories();
  const PatternView view(design, domains);

  std::vector<std::size_t> sampled;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    if (reg.sampled[i]) sampled.push_back(i);
  }
  if (sampled.empty()) throw InputError("bootstrap needs at least one sampled unit");
  const std::uint64_t n = sampled.size();

  const auto B = static_cast<std::size_t>(plan.B);
  std::vector<std::optional<Eigen::MatrixXd>> results(B);
  std::vector<std::string> reasons(B);

  parallel_for(B, plan.threads, [&](std::size_t b) {
    Rng rng(split_seed(plan.seed, kBootstrapStream, b));
    std::vector<double> multiplicity(sampled.size(), 0.0);
    for (std::uint64_t draw = 0; draw < n; ++draw) multiplicity[rng.below(n)] += 1.0;
    RowBuilder builder(view, K);
    for (std::size_t s = 0; s < sampled.size(); ++s) {
      if (multiplicity[s] > 0.0) builder.add(sampled[s], multiplicity[s], reg.outcome[sampled[s]]);
    }
    const auto beta = refit(builder.finish(), fit_options, &original.coefficients, reasons[b]);
    if (beta) results[b] = view.totals(*beta);
  });

  ReplicateEstimate est;
  est.attempted = plan.B;
  est.centre = view.totals(original.coefficients);
  std::vector<const Eigen::MatrixXd*> kept;
  for (std::size_t b = 0; b < B; ++b) {
    if (results[b]) {
      kept.push_back(&*results[b]);
    } else {
      ++est.dropped;
      est.notes.push_back(fmt::format("bootstrap replicate {} dropped: {}", b, reasons[b]));
    }
  }
  enforce_drop_policy(est, plan, "bootstrap");
  if (kept.empty()) throw NumericalError("bootstrap: every replicate was dropped");

  Eigen::MatrixXd centre = est.centre;
  if (plan.centre_on_replicate_mean) {
    centre.setZero();
    for (const auto* r : kept) centre += *r;
    centre /= static_cast<double>(kept.size());
  }
  est.gmse = Eigen::MatrixXd::Zero(est.centre.rows(), est.centre.cols());
  for (const auto* r : kept) est.gmse.array() += (r->array() - centre.array()).square();
  est.gmse /= static_cast<double>(kept.size());
  if (keep_replicates) {
    for (const auto* r : kept) est.replicates.push_back(*r);
  }
  return est;
}

ReplicateEstimate mc_oracle(const DesignMatrix& design, const Register& reg, const SealedTruth& truth,
                            const std::vector<DomainSpec>& domains, const ResamplingPlan& plan,
                            const FitOptions& fit_options, const Coefficients* warm_start, bool keep_replicates) {
  plan.validate();
  if (truth.empty()) throw InputError("MC requires simulation truth");
  if (truth.unit_count() != design.rows() || reg.size() != static_cast<std::size_t>(design.rows())) {
    throw std::invalid_argument("truth, design and register cover different units");
  }
  const Eigen::MatrixXd& p = detail::TruthAccess::probabilities(truth);
  const Eigen::Index K = p.cols();
  const PatternView view(design, domains);

  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(domains.size()), K);
  for (std::size_t d = 0; d < domains.size(); ++d) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double g = domains[d].membership(i);
      if (g != 0.0) expected.row(static_cast<Eigen::Index>(d)) += g * p.row(i);
    }
  }

  const auto G = static_cast<std::size_t>(plan.G);
  const auto M = static_cast<std::size_t>(plan.M);
  std::vector<std::optional<Eigen::MatrixXd>> results(G * M);
  std::vector<std::string> reasons(G * M);
  const RowMatrix prow = p;  // row-major for strided draws

  parallel_for(G, plan.threads, [&](std::size_t g) {
    Rng membership(split_seed(plan.seed, kMembershipStream, g));
    std::vector<std::size_t> sampled;
    for (std::size_t i = 0; i < reg.size(); ++i) {
      if (membership.bernoulli(reg.inclusion[i])) sampled.push_back(i);
    }
    RowBuilder builder(view, K);
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t index = g * M + m;
      Rng outcome(split_seed(plan.seed, kOutcomeStream, index));
      for (const auto i : sampled) {
        const int k = outcome.categorical(prow.row(static_cast<Eigen::Index>(i)).data(), K);
        builder.add(i, 1.0, k + 1);
      }
      if (sampled.empty()) {
        reasons[index] = "empty sample";
        continue;
      }
      const auto beta = refit(builder.finish(), fit_options, warm_start, reasons[index]);
      if (beta) results[index] = view.totals(*beta);
    }
  });

  ReplicateEstimate est;
  est.attempted = plan.G * plan.M;
  est.centre = expected;
  est.gmse = Eigen::MatrixXd::Zero(expected.rows(), K);
  int design_replicates = 0;
  for (std::size_t g = 0; g < G; ++g) {
    Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(expected.rows(), K);
    int used = 0;
    for (std::size_t m = 0; m < M; ++m) {
      const auto& r = results[g * M + m];
      if (!r) {
        ++est.dropped;
        est.notes.push_back(fmt::format("MC replicate (g={}, m={}) dropped: {}", g, m, reasons[g * M + m]));
        continue;
      }
      inner.array() += (r->array() - expected.array()).square();
      if (keep_replicates) est.replicates.push_back(*r);
      ++used;
    }
    if (used > 0) {
      est.gmse += inner / static_cast<double>(used);
      ++design_replicates;
    }
  }
  enforce_drop_policy(est, plan, "Monte Carlo");
  if (design_replicates == 0) throw NumericalError("Monte Carlo: every replicate was dropped");
  est.gmse /= static_cast<double>(design_replicates);
  return est;
}

}  // namespace regmse
