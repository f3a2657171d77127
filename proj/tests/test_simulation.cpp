#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "regmse/error.hpp"
#include "regmse/gmse_linear.hpp"
#include "regmse/report.hpp"
#include "regmse/simulation.hpp"

using namespace regmse;

TEST_CASE("table 4 scenario parses with its province marginal renormalised") {
  const auto sc = read_scenario_file("scenarios/table4_n100k.cfg");
  CHECK(sc.units == 100000);
  CHECK(sc.sampling_rate == 0.05);
  CHECK(sc.true_beta.categories() == 8);
  CHECK(sc.true_beta.width() == 14);
  CHECK(sc.schema().design_width() == 14);
  REQUIRE(sc.notes.size() == 1);
  CHECK(sc.notes[0].find("province") != std::string::npos);
  for (const auto& c : sc.covariates) {
    const double sum = std::accumulate(c.marginal.begin(), c.marginal.end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("scenario validation") {
  auto sc = read_scenario_file("scenarios/small_k3.cfg");
  sc.covariates[0].marginal = {0.7, 0.4};
  CHECK_THROWS_AS(sc.validate(), InputError);
  std::istringstream bad("[scenario]\nunits = 10\ncoefficients = small_k3_coefficients.csv\n"
                         "[outcome]\nlabels = a;b;c\n[covariate.x1]\nkind = binary\nlevels = 0;1\nmarginal = 0.5;0.5\n");
  // rows x1 only, while the file has x1 and x2
  CHECK_THROWS_AS((void)read_scenario(bad, "bad", "scenarios"), InputError);
}

TEST_CASE("generated register matches the scenario's marginals") {
  const auto sc = read_scenario_file("scenarios/table4_n100k.cfg");
  const auto sim = generate_register(sc, 0);
  const double N = 100000;
  const double n = static_cast<double>(sim.reg.sample_size());
  CHECK(std::abs(n - 5000.0) <= 4 * std::sqrt(N * 0.05 * 0.95));

  for (const auto& c : sc.covariates) {
    const auto* col = sim.reg.column(c.covariate.name);
    REQUIRE(col != nullptr);
    std::vector<double> count(c.marginal.size(), 0.0);
    for (auto code : col->codes) {
      const auto level = std::find(c.covariate.levels.begin(), c.covariate.levels.end(), col->dictionary[code]);
      count[static_cast<std::size_t>(level - c.covariate.levels.begin())] += 1.0;
    }
    for (std::size_t l = 0; l < count.size(); ++l) {
      const double p = c.marginal[l];
      CHECK_MESSAGE(std::abs(count[l] - N * p) <= 3 * std::sqrt(N * p * (1 - p)) + 1e-9,
                    c.covariate.name << " level " << c.covariate.levels[l]);
    }
  }
  for (std::size_t i = 0; i < sim.reg.size(); ++i) {
    if (!sim.reg.sampled[i]) REQUIRE(sim.reg.outcome[i] == 0);
  }
  CHECK_NOTHROW(sim.reg.validate(8));
}

TEST_CASE("category shares keep the published ordering") {
  auto sc = read_scenario_file("scenarios/table4_n100k.cfg");
  sc.sampling_rate = 1.0;
  const auto sim = generate_register(sc, 0);
  std::vector<long> count(8, 0);
  for (int y : sim.reg.outcome) ++count[static_cast<std::size_t>(y - 1)];
  const auto largest = std::max_element(count.begin(), count.end()) - count.begin();
  CHECK(largest == 4);
  std::vector<long> sorted = count;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::min(count[0], count[7]) == sorted[0]);
  CHECK(std::max(count[0], count[7]) == sorted[1]);
}

TEST_CASE("generation is deterministic per seed and replicate") {
  const auto sc = read_scenario_file("scenarios/small_k3.cfg");
  const auto a = generate_register(sc, 3);
  const auto b = generate_register(sc, 3);
  const auto c = generate_register(sc, 4);
  CHECK(a.reg.outcome == b.reg.outcome);
  CHECK(a.reg.sampled == b.reg.sampled);
  CHECK(a.reg.columns[0].codes == b.reg.columns[0].codes);
  CHECK(a.reg.sampled != c.reg.sampled);
}

TEST_CASE("linearised and bootstrap estimates run on a register without truth") {
  auto sc = read_scenario_file("scenarios/small_k3.cfg");
  sc.units = 2000;
  const auto sim = generate_register(sc, 0);
  const Register copy = sim.reg;  // the plain register carries no truth
  const auto design = build_design_matrix(copy, sim.schema);
  const auto model = fit(design, copy, 3);
  const auto cache = build_plugin_cache(model, design, copy);
  std::vector<DomainSpec> full{full_register_domain(copy)};
  CHECK(gmse_lin(cache, full[0]).minCoeff() > 0.0);
  ResamplingPlan plan;
  plan.B = 5;
  CHECK_NOTHROW((void)bootstrap_gmse(design, copy, model, full, plan));
  CHECK_THROWS_AS((void)mc_oracle(design, copy, SealedTruth{}, full, plan), InputError);
}

TEST_CASE("unit order does not change the estimates") {
  auto sc = read_scenario_file("scenarios/small_k3.cfg");
  sc.units = 3000;
  const auto sim = generate_register(sc, 0);
  Register shuffled = sim.reg;
  std::vector<std::size_t> order(sim.reg.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(5);
  std::shuffle(order.begin(), order.end(), gen);
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.unit_ids[i] = sim.reg.unit_ids[order[i]];
    shuffled.sampled[i] = sim.reg.sampled[order[i]];
    shuffled.inclusion[i] = sim.reg.inclusion[order[i]];
    shuffled.outcome[i] = sim.reg.outcome[order[i]];
    for (std::size_t c = 0; c < sim.reg.columns.size(); ++c) {
      shuffled.columns[c].codes[i] = sim.reg.columns[c].codes[order[i]];
    }
  }
  const auto run = [&](const Register& reg) {
    const auto design = build_design_matrix(reg, sim.schema);
    const auto model = fit(design, reg, 3);
    const auto cache = build_plugin_cache(model, design, reg);
    auto domains = domain_partition(reg, sim.schema, "region");
    domains.insert(domains.begin(), full_register_domain(reg));
    Eigen::MatrixXd out(static_cast<Eigen::Index>(domains.size()), 6);
    for (std::size_t d = 0; d < domains.size(); ++d) {
      out.row(static_cast<Eigen::Index>(d)) << predict_totals(model, domains[d]).transpose(),
          gmse_lin(cache, domains[d]).transpose();
    }
    return out;
  };
  const auto a = run(sim.reg);
  const auto b = run(shuffled);
  CHECK(((a - b).array().abs() / a.array().abs()).maxCoeff() <= 1e-10);
}

TEST_CASE("single-replicate comparison is deterministic") {
  auto sc = read_scenario_file("scenarios/small_k3.cfg");
  sc.units = 2000;
  sc.plan.B = 20;
  sc.plan.G = 4;
  sc.plan.M = 4;
  ComparisonOptions opt;
  opt.replicates = 1;
  const auto a = run_comparison(sc, opt);
  const auto b = run_comparison(sc, opt);
  // full register plus three regions, three categories, three estimators
  CHECK(a.rows.size() == 4 * 3 * 3);
  CHECK(a.summary.size() == 4 * 3 * 3);
  std::ostringstream sa, sb;
  write_study_csv(sa, a);
  write_study_csv(sb, b);
  CHECK(sa.str() == sb.str());
  const auto median = a.median_cv("full", 1, "lin");
  REQUIRE(median.has_value());
  CHECK(*median > 0.0);
  CHECK_FALSE(a.median_cv("full", 1, "nope").has_value());

  std::ostringstream summary;
  write_study_summary_csv(summary, a);
  CHECK(summary.str().rfind("domain,", 0) == 0);
}

TEST_CASE("quantiles interpolate linearly") {
  CHECK(quantile({4, 1, 3, 2}, 0.25) == 1.75);
  CHECK(quantile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(quantile({7}, 0.9) == 7);
  CHECK(quantile({1, 2}, 1.0) == 2);
  CHECK_THROWS((void)quantile({}, 0.5));
}
