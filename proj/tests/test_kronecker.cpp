#include <doctest.h>

#include "helpers.hpp"
#include "regmse/gmse_linear.hpp"
#include "regmse/kronecker.hpp"
#include "regmse/report.hpp"

using namespace regmse;

namespace {

// Reorders a covariate-major vector or matrix into category-major order.
Eigen::VectorXd to_standard(const Eigen::VectorXd& v, Eigen::Index K, Eigen::Index J) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index h = 0; h < v.size(); ++h) out(kron::standard_index(h, K, J)) = v(h);
  return out;
}

Eigen::MatrixXd to_standard(const Eigen::MatrixXd& m, Eigen::Index K, Eigen::Index J) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    for (Eigen::Index b = 0; b < m.cols(); ++b) {
      out(kron::standard_index(a, K, J), kron::standard_index(b, K, J)) = m(a, b);
    }
  }
  return out;
}

std::vector<DomainSpec> random_domains(std::mt19937_64& gen, Eigen::Index n, int count) {
  std::vector<DomainSpec> out{testing::all_units(n)};
  for (int d = 1; d < count; ++d) out.push_back(testing::random_domain(gen, n, 0.3, "d" + std::to_string(d)));
  return out;
}

}  // namespace

TEST_CASE("index permutation is a bijection") {
  const Eigen::Index K = 4, J = 5;
  std::vector<int> seen(static_cast<std::size_t>(J * (K - 1)), 0);
  for (Eigen::Index h = 0; h < J * (K - 1); ++h) ++seen[static_cast<std::size_t>(kron::standard_index(h, K, J))];
  for (int s : seen) CHECK(s == 1);
  // covariate-major h = j*(K-1)+l maps to l*J + j
  CHECK(kron::standard_index(1 * 3 + 2, K, J) == 2 * J + 1);
}

TEST_CASE("stacked probabilities match the standard engine") {
  const auto in = testing::make_instance(61, 40, 8, 10, 3, 0.3, 1.0);
  const Eigen::MatrixXd xdot = kron::stacked_design(in.design.x, 8, 0, 40);
  const Eigen::VectorXd p = kron::kf_probabilities(xdot, kron::stack_coefficients(in.beta), 8);
  CHECK((p - kron::stack_rows(in.p)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("stacked score and Hessian match the standard engine") {
  for (Eigen::Index n : {5, 50, 500}) {
    const Eigen::Index K = 4;
    const auto in = testing::make_instance(62 + static_cast<std::uint64_t>(n), n, K, 3, 2, 0.5, 0.7);
    const Eigen::Index J = in.design.cols();
    const Eigen::MatrixXd xdot = kron::stacked_design(in.design.x, K, 0, n);
    const Eigen::VectorXd b = kron::stack_coefficients(in.beta);
    const Eigen::VectorXd p = kron::kf_probabilities(xdot, b, K);
    const Eigen::VectorXd lambda_dot = kron::stack_units(in.lambda, K, 0, n);
    const auto s = to_standard(Eigen::VectorXd(kron::kf_score(xdot, kron::stack_rows(in.y), p, lambda_dot)), K, J);
    const auto s_ref = score(in.design, in.y, in.lambda, in.beta);
    CHECK((s - s_ref).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, s_ref.cwiseAbs().maxCoeff()));
    const auto h = to_standard(kron::kf_hessian(xdot, p, lambda_dot, K), K, J);
    const auto h_ref = hessian(in.design, in.lambda, in.beta);
    CHECK((h - h_ref).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, h_ref.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("selector reproduces predicted totals and is orthogonal across categories") {
  const auto in = testing::make_instance(70, 60, 3, 2, 1, 0.3);
  std::mt19937_64 gen(70);
  const auto doms = random_domains(gen, 60, 3);
  const kron::KroneckerWorkspace ws(in.design.x, 3, in.pi, doms);
  const Eigen::MatrixXd gamma = ws.selector(0, 60);
  const Eigen::VectorXd totals = gamma.transpose() * kron::stack_rows(in.p);
  const auto model = model_from_coefficients(in.design, in.beta);
  for (std::size_t d = 0; d < doms.size(); ++d) {
    const auto ref = predict_totals(model, doms[d]);
    for (Eigen::Index k = 0; k < 3; ++k) {
      CHECK(totals(static_cast<Eigen::Index>(d) * 3 + k) == doctest::Approx(ref(k)).epsilon(1e-13));
    }
  }
  // within one domain the category columns never overlap
  const Eigen::MatrixXd gtg = gamma.leftCols(3).transpose() * gamma.leftCols(3);
  CHECK((gtg - Eigen::MatrixXd(gtg.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Kronecker GMSE equals the standard engine") {
  std::mt19937_64 gen(80);
  for (int rep = 0; rep < 6; ++rep) {
    const Eigen::Index K = 2 + rep;
    const Eigen::Index n = 300 + 100 * rep;
    const auto in = testing::make_instance(80 + static_cast<std::uint64_t>(rep), n, K, 4, 1, 0.2, 0.6);
    const auto doms = random_domains(gen, n, 1 + rep);
    const auto cache = build_plugin_cache(model_from_coefficients(in.design, in.beta), in.design, in.pi);
    const auto lin = gmse_lin_all(cache, doms);
    const kron::KroneckerWorkspace ws(in.design.x, K, in.pi, doms);
    const auto kf = kron::kf_gmse(ws, in.beta);
    CHECK(testing::max_relative(kf.gmse, lin) <= 1e-8);
    CHECK(testing::max_relative(to_standard(kf.hessian, K, in.design.cols()), cache.expected_hessian(),
                                1e-12 * cache.expected_hessian().cwiseAbs().maxCoeff()) <= 1e-9);
  }
}

TEST_CASE("one call over a nine-level partition equals nine single-domain calls") {
  const auto in = testing::make_instance(90, 900, 4, 3, 1, 0.2);
  std::vector<DomainSpec> parts;
  for (int d = 0; d < 9; ++d) {
    DomainSpec s{"p" + std::to_string(d), Eigen::VectorXd::Zero(900), DomainKind::external, ""};
    for (Eigen::Index i = d; i < 900; i += 9) s.membership(i) = 1.0;
    parts.push_back(s);
  }
  const auto together = kron::kf_gmse(kron::KroneckerWorkspace(in.design.x, 4, in.pi, parts), in.beta);
  for (int d = 0; d < 9; ++d) {
    const auto alone = kron::kf_gmse(kron::KroneckerWorkspace(in.design.x, 4, in.pi, {parts[static_cast<std::size_t>(d)]}),
                                     in.beta);
    CHECK(testing::max_relative(alone.gmse.row(0), together.gmse.row(d)) <= 1e-12);
  }
  // totals are additive across the partition
  const auto full = kron::kf_gmse(kron::KroneckerWorkspace(in.design.x, 4, in.pi, {testing::all_units(900)}), in.beta);
  CHECK(testing::max_relative(together.totals.colwise().sum(), full.totals) <= 1e-12);
}

TEST_CASE("block size does not change the result") {
  const Eigen::Index n = 1000;
  const auto in = testing::make_instance(91, n, 5, 4, 1, 0.2);
  std::mt19937_64 gen(91);
  const auto doms = random_domains(gen, n, 4);
  const auto run = [&](Eigen::Index block) {
    kron::KroneckerOptions opt;
    opt.block_units = block;
    return kron::kf_gmse(kron::KroneckerWorkspace(in.design.x, 5, in.pi, doms, opt), in.beta);
  };
  const auto whole = run(n);
  for (Eigen::Index block : {n / 2, Eigen::Index{173}, Eigen::Index{1}}) {
    const auto part = run(block);
    CHECK(testing::max_relative(part.gmse, whole.gmse) <= 1e-10);
  }
  kron::KroneckerOptions tiny;
  tiny.memory_budget_bytes = 1;
  CHECK(kron::KroneckerWorkspace(in.design.x, 5, in.pi, doms, tiny).block_units() == 1);
  CHECK(kron::KroneckerWorkspace(in.design.x, 5, in.pi, doms).block_units() == n);
}
