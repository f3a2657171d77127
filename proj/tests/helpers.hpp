#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regmse/multinomial.hpp"
#include "regmse/register.hpp"

namespace testing {

using regmse::Coefficients;
using regmse::DesignMatrix;
using regmse::DomainSpec;
using regmse::RowMatrix;

struct Instance {
  DesignMatrix design;
  Coefficients beta;
  Eigen::MatrixXd p;       // true probabilities
  Eigen::MatrixXd y;       // one-hot outcomes (all units)
  Eigen::VectorXd lambda;  // sample indicators
  Eigen::VectorXd pi;
  std::vector<int> outcome;  // 1..K, all units
};

/// Random design with an intercept, `dummies` 0/1 columns and
/// `continuous` columns in [-1, 1].
inline RowMatrix random_design(std::mt19937_64& gen, Eigen::Index n, Eigen::Index dummies, Eigen::Index continuous) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::bernoulli_distribution coin(0.4);
  RowMatrix x(n, 1 + dummies + continuous);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < dummies; ++j) x(i, 1 + j) = coin(gen) ? 1.0 : 0.0;
    for (Eigen::Index j = 0; j < continuous; ++j) x(i, 1 + dummies + j) = unif(gen);
  }
  return x;
}

inline Coefficients random_beta(std::mt19937_64& gen, Eigen::Index K, Eigen::Index J, double scale) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Eigen::MatrixXd b(K - 1, J);
  for (Eigen::Index l = 0; l < K - 1; ++l) {
    for (Eigen::Index j = 0; j < J; ++j) b(l, j) = unif(gen);
  }
  return Coefficients(b);
}

inline Instance make_instance(std::uint64_t seed, Eigen::Index n, Eigen::Index K, Eigen::Index dummies,
                              Eigen::Index continuous, double rate, double scale = 0.5) {
  std::mt19937_64 gen(seed);
  Instance in;
  in.design.x = random_design(gen, n, dummies, continuous);
  for (Eigen::Index j = 0; j < in.design.x.cols(); ++j) in.design.column_names.push_back("x" + std::to_string(j));
  in.beta = random_beta(gen, K, in.design.x.cols(), scale);
  in.p = regmse::probabilities(in.design, in.beta);
  in.y = Eigen::MatrixXd::Zero(n, K);
  in.lambda.resize(n);
  in.pi = Eigen::VectorXd::Constant(n, rate);
  in.outcome.resize(static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double c = 0.0;
    const double draw = u(gen);
    Eigen::Index k = K - 1;
    for (Eigen::Index m = 0; m < K; ++m) {
      c += in.p(i, m);
      if (draw < c) {
        k = m;
        break;
      }
    }
    in.y(i, k) = 1.0;
    in.outcome[static_cast<std::size_t>(i)] = static_cast<int>(k + 1);
    in.lambda(i) = u(gen) < rate ? 1.0 : 0.0;
  }
  return in;
}

inline DomainSpec all_units(Eigen::Index n) {
  return {"full", Eigen::VectorXd::Ones(n), regmse::DomainKind::full_register, ""};
}

inline DomainSpec random_domain(std::mt19937_64& gen, Eigen::Index n, double share, const std::string& name) {
  std::bernoulli_distribution coin(share);
  DomainSpec d{name, Eigen::VectorXd::Zero(n), regmse::DomainKind::external, ""};
  for (Eigen::Index i = 0; i < n; ++i) d.membership(i) = coin(gen) ? 1.0 : 0.0;
  return d;
}

/// Straight-line probabilities: p_ik = exp(eta_ik) / (1 + sum exp), no shift.
inline Eigen::VectorXd naive_probability(const Eigen::VectorXd& x, const Eigen::MatrixXd& free) {
  const Eigen::Index K = free.rows() + 1;
  Eigen::VectorXd e(K);
  double denom = 1.0;
  for (Eigen::Index k = 0; k < K - 1; ++k) {
    e(k) = std::exp(free.row(k).dot(x));
    denom += e(k);
  }
  e(K - 1) = 1.0;
  return e / denom;
}

/// Oracle GMSE by explicit per-unit F blocks and a full-pivot LU solve.
inline Eigen::VectorXd naive_gmse(const RowMatrix& x, const Eigen::MatrixXd& free, const Eigen::VectorXd& pi,
                                  const Eigen::VectorXd& gamma) {
  const Eigen::Index N = x.rows();
  const Eigen::Index J = x.cols();
  const Eigen::Index K = free.rows() + 1;
  const Eigen::Index H = J * (K - 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(H, H);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(H, H);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(K, H);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    const Eigen::VectorXd p = naive_probability(xi, free);
    // X_i: H x (K-1), column l holds x_i in block l
    Eigen::MatrixXd xb = Eigen::MatrixXd::Zero(H, K - 1);
    for (Eigen::Index l = 0; l < K - 1; ++l) xb.block(l * J, l, J, 1) = xi;
    Eigen::MatrixXd sigma(K - 1, K - 1);
    for (Eigen::Index l = 0; l < K - 1; ++l) {
      for (Eigen::Index m = 0; m < K - 1; ++m) sigma(l, m) = (l == m ? p(l) : 0.0) - p(l) * p(m);
    }
    a -= pi(i) * xb * sigma * xb.transpose();
    meat += pi(i) * xb * sigma * xb.transpose();
    // F block: dp_k / dbeta_lj
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index l = 0; l < K - 1; ++l) {
        const double c = (k == l ? p(k) : 0.0) - p(k) * p(l);
        v.row(k).segment(l * J, J) += gamma(i) * c * xi.transpose();
      }
    }
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::MatrixXd ainv = lu.inverse();
  const Eigen::MatrixXd m = ainv * meat * ainv.transpose();
  Eigen::VectorXd out(K);
  for (Eigen::Index k = 0; k < K; ++k) out(k) = v.row(k) * m * v.row(k).transpose();
  return out;
}

inline double max_relative(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-300) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double scale = std::max(std::abs(b(i, j)), floor);
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  }
  return worst;
}

}  // namespace testing
