#include "regmse/kronecker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "regmse/error.hpp"

namespace regmse::kron {

Eigen::Index standard_index(Eigen::Index h, Eigen::Index categories, Eigen::Index width) {
  const Eigen::Index free = categories - 1;
  const Eigen::Index j = h / free;
  const Eigen::Index l = h % free;
  return l * width + j;
}

Eigen::VectorXd stack_coefficients(const Coefficients& beta) {
  const Eigen::Index K = beta.categories();
  const Eigen::Index J = beta.width();
  Eigen::VectorXd out(J * (K - 1));
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index l = 0; l < K - 1; ++l) out(j * (K - 1) + l) = beta.free_block()(l, j);
  }
  return out;
}

Eigen::MatrixXd stacked_design(const RowMatrix& x, Eigen::Index categories, Eigen::Index first, Eigen::Index count) {
  const Eigen::Index K = categories;
  const Eigen::Index J = x.cols();
  Eigen::MatrixXd xdot = Eigen::MatrixXd::Zero(count * K, J * (K - 1));
  for (Eigen::Index u = 0; u < count; ++u) {
    const auto xi = x.row(first + u);
    // x_i^T (x) I_K, baseline column dropped
    for (Eigen::Index k = 0; k < K - 1; ++k) {
      for (Eigen::Index j = 0; j < J; ++j) xdot(u * K + k, j * (K - 1) + k) = xi(j);
    }
  }
  return xdot;
}

Eigen::VectorXd stack_units(const Eigen::VectorXd& per_unit, Eigen::Index categories, Eigen::Index first,
                            Eigen::Index count) {
  Eigen::VectorXd out(count * categories);
  for (Eigen::Index u = 0; u < count; ++u) out.segment(u * categories, categories).setConstant(per_unit(first + u));
  return out;
}

Eigen::VectorXd stack_rows(const Eigen::MatrixXd& y) {
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.rows(); ++i) out.segment(i * y.cols(), y.cols()) = y.row(i).transpose();
  return out;
}

Eigen::VectorXd kf_probabilities(const Eigen::MatrixXd& xdot, const Eigen::VectorXd& beta, Eigen::Index categories) {
  const Eigen::Index K = categories;
  const Eigen::VectorXd eta = xdot * beta;
  if (!eta.allFinite()) throw NumericalError("non-finite linear predictor in stacked design");
  const Eigen::Index units = eta.size() / K;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index u = 0; u < units; ++u) {
    const auto block = eta.segment(u * K, K);
    // baseline row of X_dot is zero, so its linear predictor is 0 and e_iK = 1
    const double shift = block.maxCoeff();
    const Eigen::ArrayXd e = (block.array() - shift).exp();
    const double d_plus = e.sum();
    p.segment(u * K, K) = (e / d_plus).matrix();
  }
  return p;
}

Eigen::VectorXd kf_score(const Eigen::MatrixXd& xdot, const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                         const Eigen::VectorXd& lambda_dot) {
  // G = X_dot # (y - p); g = G^T lambda_dot
  const Eigen::MatrixXd g_rows = xdot.array().colwise() * (y - p).array();
  return g_rows.transpose() * lambda_dot;
}

Eigen::MatrixXd kf_derivative(const Eigen::MatrixXd& xdot, const Eigen::VectorXd& p, Eigen::Index categories) {
  const Eigen::Index K = categories;
  const Eigen::Index units = p.size() / K;
  Eigen::MatrixXd delta(xdot.rows(), xdot.cols());
  for (Eigen::Index u = 0; u < units; ++u) {
    const auto xu = xdot.middleRows(u * K, K);
    const auto pu = p.segment(u * K, K);
    const Eigen::RowVectorXd mean = pu.transpose() * xu;
    delta.middleRows(u * K, K) = pu.asDiagonal() * (xu.rowwise() - mean);
  }
  return delta;
}

Eigen::MatrixXd kf_hessian(const Eigen::MatrixXd& xdot, const Eigen::VectorXd& p, const Eigen::VectorXd& pi_dot,
                           Eigen::Index categories) {
  const Eigen::MatrixXd delta = kf_derivative(xdot, p, categories);
  return -(xdot.transpose() * (pi_dot.asDiagonal() * delta));
}

KroneckerWorkspace::KroneckerWorkspace(RowMatrix x, Eigen::Index categories, Eigen::VectorXd inclusion,
                                       const std::vector<DomainSpec>& domains, KroneckerOptions options)
    : x_(std::move(x)), categories_(categories), pi_(std::move(inclusion)) {
  if (categories_ < 2) throw std::invalid_argument("need at least two categories");
  if (pi_.size() != x_.rows()) throw std::invalid_argument("inclusion probabilities do not match the design");
  if (domains.empty()) throw std::invalid_argument("kf_gmse needs at least one domain");
  gamma_.resize(x_.rows(), static_cast<Eigen::Index>(domains.size()));
  for (std::size_t d = 0; d < domains.size(); ++d) {
    if (domains[d].membership.size() != x_.rows()) throw std::invalid_argument("domain does not match the design");
    gamma_.col(static_cast<Eigen::Index>(d)) = domains[d].membership;
  }

  block_units_ = options.block_units;
  if (block_units_ <= 0) {
    const Eigen::Index H = parameter_count();
    const Eigen::Index DK = domain_count() * categories_;
    // X_dot, Delta, Sigma X_dot and Gamma rows held at once
    const double per_unit = static_cast<double>(categories_) * static_cast<double>(3 * H + DK) * sizeof(double);
    const auto fit = static_cast<Eigen::Index>(static_cast<double>(options.memory_budget_bytes) / per_unit);
    block_units_ = std::clamp<Eigen::Index>(fit, 1, 65536);
  }
  block_units_ = std::min(block_units_, std::max<Eigen::Index>(x_.rows(), 1));
}

Eigen::MatrixXd KroneckerWorkspace::selector(Eigen::Index first, Eigen::Index count) const {
  const Eigen::Index K = categories_;
  const Eigen::Index D = domain_count();
  // Gamma^(d) = [gamma^(d) (x) 1_K] . I_{K;N}
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(count * K, D * K);
  for (Eigen::Index u = 0; u < count; ++u) {
    for (Eigen::Index d = 0; d < D; ++d) {
      const double g = gamma_(first + u, d);
      if (g == 0.0) continue;
      for (Eigen::Index k = 0; k < K; ++k) out(u * K + k, d * K + k) = g;
    }
  }
  return out;
}

KroneckerResult kf_gmse(const KroneckerWorkspace& ws, const Coefficients& beta) {
  const Eigen::Index K = ws.categories();
  const Eigen::Index H = ws.parameter_count();
  const Eigen::Index D = ws.domain_count();
  if (beta.categories() != K || beta.width() != ws.width()) {
    throw std::invalid_argument("coefficients do not match the workspace");
  }
  const Eigen::VectorXd b = stack_coefficients(beta);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(H, H);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(H, H);
  Eigen::MatrixXd gamma_delta = Eigen::MatrixXd::Zero(D * K, H);
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(D * K);

  for (Eigen::Index first = 0; first < ws.unit_count(); first += ws.block_units()) {
    const Eigen::Index count = std::min(ws.block_units(), ws.unit_count() - first);
    const Eigen::MatrixXd xdot = stacked_design(ws.design(), K, first, count);
    const Eigen::VectorXd pi_dot = stack_units(ws.inclusion(), K, first, count);
    const Eigen::VectorXd p = kf_probabilities(xdot, b, K);
    const Eigen::MatrixXd delta = kf_derivative(xdot, p, K);
    const Eigen::MatrixXd gamma = ws.selector(first, count);

    // Sigma_dot X_dot, one K x K multinomial covariance per unit
    Eigen::MatrixXd sigma_x(xdot.rows(), H);
    for (Eigen::Index u = 0; u < count; ++u) {
      const auto pu = p.segment(u * K, K);
      const Eigen::MatrixXd sigma = Eigen::MatrixXd(pu.asDiagonal()) - pu * pu.transpose();
      sigma_x.middleRows(u * K, K).noalias() = sigma * xdot.middleRows(u * K, K);
    }

    const Eigen::MatrixXd weighted = pi_dot.asDiagonal() * xdot;
    a.noalias() -= weighted.transpose() * delta;
    meat.noalias() += weighted.transpose() * sigma_x;
    gamma_delta.noalias() += gamma.transpose() * delta;
    totals.noalias() += gamma.transpose() * p;
  }

  KroneckerResult result;
  result.hessian = a;
  // U_bar rows: A^{-T} (Gamma^T Delta)^T
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a.transpose());
  const Eigen::MatrixXd w = lu.solve(gamma_delta.transpose());
  const Eigen::MatrixXd mw = meat * w;
  result.gmse.resize(D, K);
  result.totals.resize(D, K);
  for (Eigen::Index d = 0; d < D; ++d) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const Eigen::Index c = d * K + k;
      result.gmse(d, k) = std::max(0.0, w.col(c).dot(mw.col(c)));
      result.totals(d, k) = totals(c);
    }
  }
  return result;
}

}  // namespace regmse::kron
