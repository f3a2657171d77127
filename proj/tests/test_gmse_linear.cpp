#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "regmse/error.hpp"
#include "regmse/gmse_linear.hpp"
#include "regmse/report.hpp"

using namespace regmse;

TEST_CASE("F block matches finite differences of the probabilities") {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::Index K = 3 + rep;
    const Eigen::Index J = 4;
    const auto beta = testing::random_beta(gen, K, J, 1.0);
    const RowMatrix x = testing::random_design(gen, 1, 2, 1);
    const Eigen::VectorXd p = probabilities(x, beta).row(0).transpose();
    const auto f = f_matrix_row(x.row(0).transpose(), p);
    const Eigen::VectorXd theta = beta.as_vector();
    const double h = 1e-6;
    for (Eigen::Index c = 0; c < theta.size(); ++c) {
      Eigen::VectorXd up = theta, down = theta;
      up(c) += h;
      down(c) -= h;
      const Eigen::VectorXd fd = (probabilities(x, Coefficients::from_vector(up, K, J)).row(0) -
                                  probabilities(x, Coefficients::from_vector(down, K, J)).row(0))
                                     .transpose() /
                                 (2 * h);
      CHECK((fd - f.col(c)).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1e-3, f.col(c).cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("linearised GMSE matches the per-unit oracle") {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    const Eigen::Index K = 3 + static_cast<Eigen::Index>(seed % 3);
    const auto in = testing::make_instance(seed, 250, K, 3, 2, 0.2, 0.8);
    const auto model = model_from_coefficients(in.design, in.beta);
    const auto cache = build_plugin_cache(model, in.design, in.pi);
    std::mt19937_64 gen(seed);
    const auto dom = testing::random_domain(gen, 250, 0.4, "d");
    const auto got = gmse_lin(cache, dom);
    const auto want = testing::naive_gmse(in.design.x, in.beta.free_block(), in.pi, dom.membership);
    CHECK(testing::max_relative(got, want) <= 1e-10);
  }
}

TEST_CASE("middle matrix is the inverse information under a constant sampling rate") {
  // with pi constant the meat equals -A_bar, so M = (-A_bar)^{-1}
  const auto in = testing::make_instance(41, 400, 4, 3, 1, 0.1);
  const auto cache = build_plugin_cache(model_from_coefficients(in.design, in.beta), in.design, in.pi);
  const Eigen::MatrixXd inv = (-cache.expected_hessian()).inverse();
  CHECK(testing::max_relative(cache.middle(), inv, 1e-6 * inv.cwiseAbs().maxCoeff()) <= 1e-9);
}

TEST_CASE("empty domain has zero GMSE") {
  const auto in = testing::make_instance(42, 100, 3, 2, 1, 0.3);
  const auto cache = build_plugin_cache(model_from_coefficients(in.design, in.beta), in.design, in.pi);
  DomainSpec none{"none", Eigen::VectorXd::Zero(100), DomainKind::external, ""};
  CHECK(gmse_lin(cache, none).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("doubling every inclusion probability halves the GMSE") {
  const auto in = testing::make_instance(43, 300, 4, 3, 1, 0.2);
  const auto model = model_from_coefficients(in.design, in.beta);
  const auto full = testing::all_units(300);
  const auto g1 = gmse_lin(build_plugin_cache(model, in.design, in.pi), full);
  const auto g2 = gmse_lin(build_plugin_cache(model, in.design, Eigen::VectorXd(2.0 * in.pi)), full);
  CHECK(testing::max_relative(g2, 0.5 * g1) <= 1e-12);
}

TEST_CASE("more sampling never increases the GMSE") {
  const auto in = testing::make_instance(44, 300, 3, 3, 1, 0.1);
  const auto model = model_from_coefficients(in.design, in.beta);
  const auto full = testing::all_units(300);
  Eigen::VectorXd pi2 = in.pi;
  for (Eigen::Index i = 0; i < 300; i += 3) pi2(i) = 0.5;
  const auto g1 = gmse_lin(build_plugin_cache(model, in.design, in.pi), full);
  const auto g2 = gmse_lin(build_plugin_cache(model, in.design, pi2), full);
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(g2(k) <= g1(k) * (1 + 1e-12));
}

TEST_CASE("expected Hessian at pi = lambda is the fitting Hessian") {
  const auto in = testing::make_instance(45, 2000, 4, 4, 0, 0.3);
  const auto model = fit(in.design, in.y, in.lambda);
  REQUIRE(model.converged);
  const auto cache = build_plugin_cache(model, in.design, in.lambda);
  const auto rows = aggregate(find_patterns(in.design.x), in.lambda, in.outcome, 4);
  const Eigen::MatrixXd a = hessian(rows.x, rows.weight, probabilities(rows.x, model.coefficients));
  // same pattern order and summation order: bitwise
  CHECK((cache.expected_hessian().array() == a.array()).all());
  const Eigen::MatrixXd unit_level = hessian(in.design, in.lambda, model.coefficients);
  CHECK(testing::max_relative(cache.expected_hessian(), unit_level, 1e-12 * unit_level.cwiseAbs().maxCoeff()) <=
        1e-10);
}

TEST_CASE("cache rebuilds are bit-identical") {
  const auto in = testing::make_instance(46, 500, 5, 3, 1, 0.2);
  const auto model = model_from_coefficients(in.design, in.beta);
  const auto a = build_plugin_cache(model, in.design, in.pi);
  const auto b = build_plugin_cache(model, in.design, in.pi);
  CHECK((a.middle().array() == b.middle().array()).all());
  const auto full = testing::all_units(500);
  CHECK((gmse_lin(a, full).array() == gmse_lin(b, full).array()).all());
}

TEST_CASE("draw variant adds the multinomial variance") {
  const auto in = testing::make_instance(47, 200, 3, 2, 1, 0.2);
  const auto model = model_from_coefficients(in.design, in.beta);
  const auto cache = build_plugin_cache(model, in.design, in.pi);
  const auto full = testing::all_units(200);
  const auto lin = gmse_lin(cache, full);
  const auto draw = gmse_draw_variant(lin, model.fitted_probabilities, full);
  const auto extra = draw_variance(model.fitted_probabilities, full);
  CHECK((draw.array() == (lin + extra).array()).all());
  // the subtraction is exact up to the rounding of the sum
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(std::abs((draw(k) - lin(k)) - extra(k)) <= std::numeric_limits<double>::epsilon() * draw(k));
  }

  Eigen::MatrixXd half(1, 2);
  half << 0.5, 0.5;
  DomainSpec one{"one", Eigen::VectorXd::Ones(1), DomainKind::full_register, ""};
  CHECK(draw_variance(half, one)(0) == 0.25);
}

TEST_CASE("coefficient of variation") {
  CHECK(std::abs(100 * cv(113719, 497936) - 0.62) < 0.005);
  CHECK(std::abs(100 * cv(1039, 15195) - 11.86) < 0.005);
  CHECK(cv(4.0, 4.0) == 0.5);
  try {
    (void)cv(0.0, 1.0);
    FAIL("expected UndefinedCv");
  } catch (const UndefinedCv& e) {
    CHECK(std::string(e.what()) == "CV undefined on empty/null total");
  }
}

TEST_CASE("cumulated GMSE is the sum over categories and the trace of the category block") {
  const auto in = testing::make_instance(48, 300, 4, 3, 1, 0.2);
  const auto cache = build_plugin_cache(model_from_coefficients(in.design, in.beta), in.design, in.pi);
  const auto full = testing::all_units(300);
  const auto g = gmse_lin(cache, full);
  CHECK(cumulated_gmse(g) == g.sum());
  const Eigen::MatrixXd v = cache.domain_gradient(full);
  const double trace = (v * cache.middle() * v.transpose()).trace();
  CHECK(std::abs(trace - g.sum()) <= 1e-10 * g.sum());
}

TEST_CASE("partition totals add up to the full register") {
  const auto in = testing::make_instance(49, 900, 4, 3, 1, 0.2);
  const auto model = model_from_coefficients(in.design, in.beta);
  std::vector<DomainSpec> parts;
  for (int d = 0; d < 9; ++d) {
    DomainSpec s{"p" + std::to_string(d), Eigen::VectorXd::Zero(900), DomainKind::external, ""};
    for (Eigen::Index i = d; i < 900; i += 9) s.membership(i) = 1.0;
    parts.push_back(s);
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(4);
  for (const auto& s : parts) sum += predict_totals(model, s);
  const auto full = predict_totals(model, testing::all_units(900));
  CHECK((sum - full).cwiseAbs().maxCoeff() <= 1e-10 * full.maxCoeff());
}

TEST_CASE("gmse_lin_all stacks per-domain queries") {
  const auto in = testing::make_instance(50, 300, 3, 2, 1, 0.2);
  const auto cache = build_plugin_cache(model_from_coefficients(in.design, in.beta), in.design, in.pi);
  std::mt19937_64 gen(50);
  std::vector<DomainSpec> doms{testing::all_units(300), testing::random_domain(gen, 300, 0.5, "r")};
  const auto all = gmse_lin_all(cache, doms);
  REQUIRE(all.rows() == 2);
  CHECK((all.row(1).transpose().array() == gmse_lin(cache, doms[1]).array()).all());
}
