#include "regmse/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "regmse/csv.hpp"
#include "regmse/error.hpp"
#include "regmse/gmse_linear.hpp"
#include "regmse/report.hpp"
#include "regmse/schema.hpp"
#include "truth_access.hpp"

namespace regmse {

namespace pt = boost::property_tree;

namespace {

constexpr std::uint64_t kCovariateStream = 0xc0;
constexpr std::uint64_t kResponseStream = 0x7e5;
constexpr std::uint64_t kSamplingStream = 0x5a;
constexpr std::uint64_t kBootstrapPlanStream = 0xb0;
constexpr std::uint64_t kMonteCarloPlanStream = 0x3c;

std::vector<std::string> design_column_names(const CovariateSchema& schema) {
  std::vector<std::string> names{"(Intercept)"};
  for (const auto& cov : schema.covariates()) {
    if (cov.role != CovariateRole::predictor) continue;
    for (std::size_t l = 0; l < cov.levels.size(); ++l) {
      if (l == cov.reference) continue;
      names.push_back(cov.kind == CovariateKind::binary ? cov.name : fmt::format("{}::{}", cov.name, cov.levels[l]));
    }
  }
  return names;
}

bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InputError(fmt::format("{}: expected true/false, got '{}'", where, text));
}

template <class T>
T get_value(const pt::ptree& body, const std::string& key, T fallback, const std::string& where) {
  try {
    return body.get<T>(key, fallback);
  } catch (const pt::ptree_bad_data&) {
    throw InputError(fmt::format("{}: bad value for '{}'", where, key));
  }
}

}  // namespace

CovariateSchema SimulationScenario::schema() const {
  std::vector<Covariate> covs;
  covs.reserve(covariates.size());
  for (const auto& c : covariates) covs.push_back(c.covariate);
  return CovariateSchema(std::move(covs), category_labels);
}

void SimulationScenario::validate() const {
  if (units < 1) throw InputError("scenario needs at least one unit");
  if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) throw InputError("sampling_rate must lie in (0, 1]");
  if (replicates < 1) throw InputError("replicates must be at least 1");
  plan.validate();
  for (const auto& c : covariates) {
    if (c.marginal.size() != c.covariate.levels.size()) {
      throw InputError(fmt::format("covariate '{}': {} marginal entries for {} levels", c.covariate.name,
                                   c.marginal.size(), c.covariate.levels.size()));
    }
    double sum = 0.0;
    for (const double m : c.marginal) {
      if (!(m >= 0.0)) throw InputError(fmt::format("covariate '{}': negative marginal", c.covariate.name));
      sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InputError(fmt::format("covariate '{}': marginal sums to {}", c.covariate.name, sum));
    }
  }
  const auto sch = schema();
  if (true_beta.categories() != static_cast<Eigen::Index>(category_labels.size()) ||
      true_beta.width() != static_cast<Eigen::Index>(sch.design_width())) {
    throw InputError("true coefficients do not match the scenario's design");
  }
  if (!true_beta.free_block().allFinite()) throw InputError("true coefficients must be finite");
}

SimulationScenario read_scenario(std::istream& in, const std::string& source_name, const std::string& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(fmt::format("{}: {}", source_name, e.message()));
  }

  SimulationScenario sc;
  std::string coefficient_path;
  bool normalise = false;
  for (const auto& [section, body] : tree) {
    const auto where = fmt::format("{} [{}]", source_name, section);
    if (section == "scenario") {
      sc.name = body.get<std::string>("name", "scenario");
      sc.units = get_value<Eigen::Index>(body, "units", 0, where);
      sc.sampling_rate = get_value<double>(body, "sampling_rate", 0.05, where);
      sc.seed = get_value<std::uint64_t>(body, "seed", 1, where);
      sc.replicates = get_value<int>(body, "replicates", 20, where);
      coefficient_path = body.get<std::string>("coefficients", "");
      normalise = parse_bool(body.get<std::string>("normalise_marginals", "false"), where);
      sc.domain_columns = split_list(body.get<std::string>("domains", ""));
      sc.run_bootstrap = parse_bool(body.get<std::string>("bootstrap", "true"), where);
      sc.run_monte_carlo = parse_bool(body.get<std::string>("monte_carlo", "true"), where);
    } else if (section == "resampling") {
      sc.plan.B = get_value<int>(body, "B", sc.plan.B, where);
      sc.plan.G = get_value<int>(body, "G", sc.plan.G, where);
      sc.plan.M = get_value<int>(body, "M", sc.plan.M, where);
      sc.plan.threads = get_value<unsigned>(body, "threads", 0, where);
    } else if (section == "outcome") {
      sc.category_labels = split_list(body.get<std::string>("labels", ""));
    } else if (section.rfind("covariate.", 0) == 0) {
      SimulatedCovariate c;
      c.covariate.name = section.substr(std::string("covariate.").size());
      const auto kind = body.get<std::string>("kind", "categorical");
      if (kind == "binary") {
        c.covariate.kind = CovariateKind::binary;
      } else if (kind != "categorical") {
        throw InputError(fmt::format("{}: unknown kind '{}'", where, kind));
      }
      c.covariate.levels = split_list(body.get<std::string>("levels", ""));
      const auto role = body.get<std::string>("role", "predictor");
      if (role == "predictor") {
        c.covariate.role = CovariateRole::predictor;
      } else if (role == "external_domain") {
        c.covariate.role = CovariateRole::external_domain;
      } else {
        throw InputError(fmt::format("{}: role must be predictor or external_domain", where));
      }
      for (const auto& m : split_list(body.get<std::string>("marginal", ""))) {
        c.marginal.push_back(csv::parse_double(m, where + " marginal"));
      }
      sc.covariates.push_back(std::move(c));
    } else {
      throw InputError(fmt::format("{}: unexpected section", where));
    }
  }
  if (sc.category_labels.empty()) throw InputError(fmt::format("{}: missing [outcome] labels", source_name));
  if (coefficient_path.empty()) throw InputError(fmt::format("{}: missing coefficients path", source_name));

  if (normalise) {
    for (auto& c : sc.covariates) {
      double sum = 0.0;
      for (const double m : c.marginal) sum += m;
      if (sum > 0.0 && std::abs(sum - 1.0) > 1e-9) {
        for (double& m : c.marginal) m /= sum;
        sc.notes.push_back(fmt::format("marginal of '{}' summed to {:.6g}; renormalised", c.covariate.name, sum));
      }
    }
  }

  std::filesystem::path coef(coefficient_path);
  if (coef.is_relative() && !base_dir.empty()) coef = std::filesystem::path(base_dir) / coef;
  const auto table = read_coefficients_file(coef.string());
  const auto expected = design_column_names(sc.schema());
  if (table.column_names != expected) {
    std::string names;
    for (const auto& n : expected) names += (names.empty() ? "" : ", ") + n;
    throw InputError(fmt::format("{}: coefficient rows must be, in order: {}", coef.string(), names));
  }
  if (table.category_labels.size() != sc.category_labels.size()) {
    throw InputError(fmt::format("{}: {} coefficient columns for {} categories", coef.string(),
                                 table.category_labels.size(), sc.category_labels.size()));
  }
  sc.true_beta = table.coefficients;
  sc.validate();
  return sc;
}

SimulationScenario read_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open scenario '{}'", path));
  return read_scenario(in, path, std::filesystem::path(path).parent_path().string());
}

SimulatedRegister generate_register(const SimulationScenario& sc, std::uint64_t replicate) {
  sc.validate();
  const auto N = static_cast<std::size_t>(sc.units);
  const Eigen::Index K = sc.true_beta.categories();

  SimulatedRegister out;
  out.schema = sc.schema();
  Register& reg = out.reg;
  reg.unit_ids.reserve(N);
  for (std::size_t i = 0; i < N; ++i) reg.unit_ids.push_back(fmt::format("u{:07d}", i + 1));

  Rng cov_rng(split_seed(sc.seed, kCovariateStream, replicate));
  for (const auto& c : sc.covariates) {
    ColumnData col;
    col.name = c.covariate.name;
    col.dictionary = c.covariate.levels;
    col.codes.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      col.codes[i] = static_cast<std::uint32_t>(
          cov_rng.categorical(c.marginal.data(), static_cast<Eigen::Index>(c.marginal.size())));
    }
    reg.columns.push_back(std::move(col));
  }

  const DesignMatrix design = build_design_matrix(reg, out.schema);
  const RowMatrix p = probabilities(design, sc.true_beta);

  Rng y_rng(split_seed(sc.seed, kResponseStream, replicate));
  std::vector<int> y(N);
  for (std::size_t i = 0; i < N; ++i) y[i] = 1 + y_rng.categorical(p.row(static_cast<Eigen::Index>(i)).data(), K);

  Rng s_rng(split_seed(sc.seed, kSamplingStream, replicate));
  reg.sampled.resize(N);
  reg.inclusion.assign(N, sc.sampling_rate);
  reg.outcome.assign(N, 0);
  for (std::size_t i = 0; i < N; ++i) {
    reg.sampled[i] = s_rng.bernoulli(sc.sampling_rate) ? 1 : 0;
    if (reg.sampled[i]) reg.outcome[i] = y[i];
  }
  out.truth = detail::TruthAccess::seal(Eigen::MatrixXd(p), std::move(y));
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::optional<double> StudyReport::median_cv(const std::string& domain, std::size_t category,
                                             const std::string& estimator) const {
  for (const auto& s : summary) {
    if (s.domain == domain && s.category == category && s.estimator == estimator) return s.median;
  }
  return std::nullopt;
}

StudyReport run_comparison(const SimulationScenario& sc, const ComparisonOptions& options) {
  const int S = options.replicates.value_or(sc.replicates);
  const bool boot = options.bootstrap.value_or(sc.run_bootstrap);
  const bool mc = options.monte_carlo.value_or(sc.run_monte_carlo);
  if (S < 1) throw InputError("replicates must be at least 1");

  StudyReport study;
  study.notes = sc.notes;
  for (int s = 0; s < S; ++s) {
    const SimulatedRegister sim = generate_register(sc, static_cast<std::uint64_t>(s));
    const DesignMatrix design = build_design_matrix(sim.reg, sim.schema);
    const FittedModel model = fit(design, sim.reg, static_cast<Eigen::Index>(sc.category_labels.size()), options.fit);
    if (!model.converged) ++study.nonconverged_fits;
    if (model.used_fallback()) study.used_fallback = true;

    std::vector<DomainSpec> domains{full_register_domain(sim.reg)};
    for (const auto& col : sc.domain_columns) {
      auto part = domain_partition(sim.reg, sim.schema, col);
      domains.insert(domains.end(), part.begin(), part.end());
    }

    CacheOptions cache_options;
    cache_options.allow_nonconverged = true;
    const PluginCache cache = build_plugin_cache(model, design, sim.reg, cache_options);
    if (cache.diagnostics().used_fallback()) study.used_fallback = true;
    const Eigen::MatrixXd lin = gmse_lin_all(cache, domains);
    GmseReport report = make_report(model, sim.reg, domains, lin, sc.category_labels);

    Eigen::MatrixXd truth_totals;
    if (boot) {
      ResamplingPlan plan = sc.plan;
      plan.seed = split_seed(sc.seed, kBootstrapPlanStream, static_cast<std::uint64_t>(s));
      const auto est = bootstrap_gmse(design, sim.reg, model, domains, plan, options.fit);
      if (est.dropped > 0) {
        study.notes.push_back(fmt::format("replicate {}: {} bootstrap replicates dropped", s, est.dropped));
      }
      attach_bootstrap(report, est.gmse);
    }
    if (mc) {
      ResamplingPlan plan = sc.plan;
      plan.seed = split_seed(sc.seed, kMonteCarloPlanStream, static_cast<std::uint64_t>(s));
      const auto est = mc_oracle(design, sim.reg, sim.truth, domains, plan, options.fit, &model.coefficients);
      if (est.dropped > 0) {
        study.notes.push_back(fmt::format("replicate {}: {} Monte-Carlo replicates dropped", s, est.dropped));
      }
      attach_monte_carlo(report, est.gmse, est.centre);
    }

    for (const auto& r : report.rows) {
      StudyRow base;
      base.replicate = s;
      base.domain = r.domain;
      base.category = r.category;
      base.label = r.category_label;
      base.theta_hat = r.theta_hat;
      base.n_k = r.n_kd;

      StudyRow lin_row = base;
      lin_row.estimator = "lin";
      lin_row.gmse = r.gmse_lin;
      lin_row.cv = r.cv;
      study.rows.push_back(std::move(lin_row));
      if (r.gmse_boot) {
        StudyRow b = base;
        b.estimator = "boot";
        b.gmse = *r.gmse_boot;
        b.cv = r.cv_boot;
        study.rows.push_back(std::move(b));
      }
      if (r.gmse_mc) {
        StudyRow m = base;
        m.estimator = "mc";
        m.gmse = *r.gmse_mc;
        m.cv = r.cv_mc;
        study.rows.push_back(std::move(m));
      }
    }
  }

  // summaries in first-seen (domain, category, estimator) order
  std::vector<std::tuple<std::string, std::size_t, std::string, std::string>> keys;
  std::map<std::tuple<std::string, std::size_t, std::string>, std::vector<double>> values;
  for (const auto& r : study.rows) {
    auto key = std::make_tuple(r.domain, r.category, r.estimator);
    auto [it, inserted] = values.try_emplace(key);
    if (inserted) keys.emplace_back(r.domain, r.category, r.estimator, r.label);
    if (r.cv) it->second.push_back(*r.cv);
  }
  for (const auto& [domain, category, estimator, label] : keys) {
    const auto& v = values.at({domain, category, estimator});
    if (v.empty()) continue;
    StudySummary s;
    s.domain = domain;
    s.category = category;
    s.label = label;
    s.estimator = estimator;
    s.count = static_cast<int>(v.size());
    s.min = quantile(v, 0.0);
    s.q25 = quantile(v, 0.25);
    s.median = quantile(v, 0.5);
    s.q75 = quantile(v, 0.75);
    s.max = quantile(v, 1.0);
    study.summary.push_back(std::move(s));
  }
  return study;
}

void write_study_csv(std::ostream& out, const StudyReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(report.rows.size());
  for (const auto& r : report.rows) {
    rows.push_back({std::to_string(r.replicate), r.domain, std::to_string(r.category), r.label, r.estimator,
                    csv::format_double(r.theta_hat), std::to_string(r.n_k), csv::format_double(r.gmse),
                    r.cv ? csv::format_double(*r.cv) : std::string()});
  }
  csv::write(out, {"replicate", "domain", "category", "label", "estimator", "theta_hat", "n_k", "gmse", "cv"}, rows);
}

void write_study_summary_csv(std::ostream& out, const StudyReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : report.summary) {
    rows.push_back({s.domain, std::to_string(s.category), s.label, s.estimator, std::to_string(s.count),
                    csv::format_double(s.min), csv::format_double(s.q25), csv::format_double(s.median),
                    csv::format_double(s.q75), csv::format_double(s.max)});
  }
  csv::write(out, {"domain", "category", "label", "estimator", "count", "cv_min", "cv_q25", "cv_median", "cv_q75",
                   "cv_max"},
             rows);
}

}  // namespace regmse
