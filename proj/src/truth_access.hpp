#pragma once

// Private to the library sources: the generator and the Monte-Carlo oracle.

#include "regmse/truth.hpp"

namespace regmse::detail {

struct TruthAccess {
  static SealedTruth seal(Eigen::MatrixXd p, std::vector<int> outcome) {
    SealedTruth t;
    t.p_ = std::move(p);
    t.outcome_ = std::move(outcome);
    return t;
  }
  static const Eigen::MatrixXd& probabilities(const SealedTruth& t) { return t.p_; }
  static const std::vector<int>& outcome(const SealedTruth& t) { return t.outcome_; }
};

}  // namespace regmse::detail
