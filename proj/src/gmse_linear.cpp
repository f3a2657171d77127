#include "regmse/gmse_linear.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "regmse/error.hpp"

namespace regmse {

Eigen::MatrixXd f_matrix_row(const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
  const Eigen::Index J = x.size();
  const Eigen::Index K = p.size();
  Eigen::MatrixXd f(K, J * (K - 1));
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index l = 0; l < K - 1; ++l) {
      const double c = (l == k) ? p(k) * (1.0 - p(k)) : -p(k) * p(l);
      f.row(k).segment(l * J, J) = c * x.transpose();
    }
  }
  return f;
}

Eigen::VectorXd PluginCache::pattern_weights(const DomainSpec& domain) const {
  if (domain.membership.size() != unit_count()) {
    throw std::invalid_argument("domain and cache cover different registers");
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(patterns_.count());
  for (std::size_t i = 0; i < patterns_.unit_pattern.size(); ++i) {
    g(patterns_.unit_pattern[i]) += domain.membership(static_cast<Eigen::Index>(i));
  }
  return g;
}

Eigen::MatrixXd PluginCache::domain_gradient(const DomainSpec& domain) const {
  const Eigen::VectorXd g = pattern_weights(domain);
  const Eigen::Index J = width();
  const Eigen::Index K = categories();
  const auto& p = pattern_p_;
  Eigen::MatrixXd v(K, J * (K - 1));
  Eigen::VectorXd c(patterns_.count());
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index l = 0; l < K - 1; ++l) {
      if (l == k) {
        c = g.array() * p.col(k).array() * (1.0 - p.col(k).array());
      } else {
        c = -(g.array() * p.col(k).array() * p.col(l).array());
      }
      v.row(k).segment(l * J, J).noalias() = (patterns_.rows.transpose() * c).transpose();
    }
  }
  return v;
}

namespace {

// sum_p w_p (X_p Sigma_p X_p^T) with Sigma_p = diag(p) - p p^T over k < K.
Eigen::MatrixXd accumulate_meat(const RowMatrix& x, const Eigen::VectorXd& w, const ProbabilityMatrix& p) {
  const Eigen::Index J = x.cols();
  const Eigen::Index K = p.cols();
  const Eigen::Index H = J * (K - 1);
  Eigen::MatrixXd meat(H, H);
  Eigen::VectorXd sigma(x.rows());
  for (Eigen::Index l = 0; l < K - 1; ++l) {
    for (Eigen::Index m = 0; m <= l; ++m) {
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double cov = (l == m) ? p(r, l) - p(r, l) * p(r, l) : -p(r, l) * p(r, m);
        sigma(r) = w(r) * cov;
      }
      meat.block(l * J, m * J, J, J).noalias() = x.transpose() * sigma.asDiagonal() * x;
      if (l != m) meat.block(m * J, l * J, J, J) = meat.block(l * J, m * J, J, J).transpose();
    }
  }
  return meat;
}

}  // namespace

PluginCache build_plugin_cache(const FittedModel& model, const DesignMatrix& design, const Eigen::VectorXd& inclusion,
                               const CacheOptions& options) {
  if (!model.converged && !options.allow_nonconverged) {
    throw NumericalError("model did not converge; refusing to build the GMSE plug-in cache");
  }
  if (inclusion.size() != design.rows() || model.fitted_probabilities.rows() != design.rows()) {
    throw std::invalid_argument("model, design and inclusion probabilities cover different registers");
  }

  PluginCache cache;
  cache.patterns_ = find_patterns(design.x);
  cache.pattern_p_ = probabilities(cache.patterns_.rows, model.coefficients);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(cache.patterns_.count());
  for (std::size_t i = 0; i < cache.patterns_.unit_pattern.size(); ++i) {
    w(cache.patterns_.unit_pattern[i]) += inclusion(static_cast<Eigen::Index>(i));
  }

  cache.a_bar_ = hessian(cache.patterns_.rows, w, cache.pattern_p_);
  const Eigen::MatrixXd info = -cache.a_bar_;
  const Eigen::Index H = info.rows();
  const Eigen::MatrixXd meat = accumulate_meat(cache.patterns_.rows, w, cache.pattern_p_);

  auto& diag = cache.diagnostics_;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() == Eigen::Success) {
    diag.rcond = llt.rcond();
    const Eigen::MatrixXd left = llt.solve(meat);
    cache.middle_ = llt.solve(left.transpose());
  } else {
    double ridge = options.ridge > 0.0 ? options.ridge : 1e-8;
    const double scale = std::max(1.0, info.diagonal().cwiseAbs().maxCoeff());
    bool solved = false;
    for (int attempt = 0; attempt < 6 && !solved; ++attempt, ridge *= 10.0) {
      llt.compute(info + ridge * scale * Eigen::MatrixXd::Identity(H, H));
      if (llt.info() == Eigen::Success) {
        diag.ridge_used = ridge * scale;
        diag.messages.push_back(fmt::format("-A_bar not positive definite; ridge {:.1e} applied", diag.ridge_used));
        const Eigen::MatrixXd left = llt.solve(meat);
        cache.middle_ = llt.solve(left.transpose());
        solved = true;
      }
    }
    if (!solved) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
      const Eigen::VectorXd values = eig.eigenvalues();
      const double cutoff = 1e-12 * std::max(1.0, values.cwiseAbs().maxCoeff());
      Eigen::VectorXd inv_values(H);
      for (Eigen::Index h = 0; h < H; ++h) inv_values(h) = values(h) > cutoff ? 1.0 / values(h) : 0.0;
      const Eigen::MatrixXd pinv = eig.eigenvectors() * inv_values.asDiagonal() * eig.eigenvectors().transpose();
      cache.middle_ = pinv * meat * pinv;
      diag.pseudo_inverse = true;
      diag.messages.push_back("-A_bar singular; pseudo-inverse used");
    }
  }
  cache.middle_ = 0.5 * (cache.middle_ + cache.middle_.transpose()).eval();
  return cache;
}

PluginCache build_plugin_cache(const FittedModel& model, const DesignMatrix& design, const Register& reg,
                               const CacheOptions& options) {
  const Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(reg.inclusion.data(),
                                                               static_cast<Eigen::Index>(reg.inclusion.size()));
  return build_plugin_cache(model, design, pi, options);
}

Eigen::VectorXd gmse_lin(const PluginCache& cache, const DomainSpec& domain, std::vector<std::string>* notes) {
  const Eigen::MatrixXd v = cache.domain_gradient(domain);
  const Eigen::MatrixXd& m = cache.middle();
  const Eigen::MatrixXd abs_m = m.cwiseAbs();
  Eigen::VectorXd out(v.rows());
  for (Eigen::Index k = 0; k < v.rows(); ++k) {
    const double value = v.row(k) * m * v.row(k).transpose();
    if (value >= 0.0) {
      out(k) = value;
      continue;
    }
    const Eigen::VectorXd abs_v = v.row(k).cwiseAbs().transpose();
    const double scale = abs_v.dot(abs_m * abs_v);
    if (value < -1e-9 * scale) {
      throw NumericalError(fmt::format("negative GMSE {:.6e} for domain '{}' category {}", value, domain.name, k + 1));
    }
    out(k) = 0.0;
    if (notes) notes->push_back(fmt::format("domain '{}' category {}: GMSE {:.3e} clamped to 0", domain.name, k + 1, value));
  }
  return out;
}

Eigen::VectorXd draw_variance(const ProbabilityMatrix& fitted, const DomainSpec& domain) {
  const Eigen::Index K = fitted.cols();
  Eigen::VectorXd extra = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
    const double g = domain.membership(i);
    if (g == 0.0) continue;
    for (Eigen::Index k = 0; k < K; ++k) extra(k) += g * fitted(i, k) * (1.0 - fitted(i, k));
  }
  return extra;
}

Eigen::VectorXd gmse_draw_variant(const Eigen::VectorXd& lin, const ProbabilityMatrix& fitted,
                                  const DomainSpec& domain) {
  return lin + draw_variance(fitted, domain);
}

double cv(double theta, double gmse) {
  if (!(theta > 0.0)) throw UndefinedCv();
  if (gmse < 0.0) throw std::invalid_argument("GMSE must be nonnegative");
  return std::sqrt(gmse) / theta;
}

double cumulated_gmse(const Eigen::VectorXd& per_category) { return per_category.sum(); }

}  // namespace regmse
