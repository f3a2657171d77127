#pragma once

#include <vector>

#include <Eigen/Dense>

namespace regmse {

namespace detail {
struct TruthAccess;
}

/// Simulation truth (true probabilities and the full outcome vector).
///
/// Only the generator writes it and only the Monte-Carlo oracle reads it;
/// the public interface exposes nothing but its shape.
class SealedTruth {
 public:
  SealedTruth() = default;

  [[nodiscard]] bool empty() const { return p_.size() == 0; }
  [[nodiscard]] Eigen::Index unit_count() const { return p_.rows(); }
  [[nodiscard]] Eigen::Index categories() const { return p_.cols(); }

 private:
  friend struct detail::TruthAccess;

  Eigen::MatrixXd p_;
  std::vector<int> outcome_;
};

}  // namespace regmse
