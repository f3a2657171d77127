// regmse: register totals for categorical outcomes with linearised GMSE.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "regmse/csv.hpp"
#include "regmse/error.hpp"
#include "regmse/gmse_linear.hpp"
#include "regmse/kronecker.hpp"
#include "regmse/multinomial.hpp"
#include "regmse/register.hpp"
#include "regmse/report.hpp"
#include "regmse/resampling.hpp"
#include "regmse/schema.hpp"
#include "regmse/simulation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace regmse;

namespace {

struct RunConfig {
  std::string register_path;
  std::string schema_path;
  std::string scenario_path;
  std::uint64_t replicate = 0;
  std::string engine = "standard";
  std::vector<std::string> domains;
  int B = 1000;
  int G = 50;
  int M = 50;
  int S = 0;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool deterministic = false;
  double tol = 1e-8;
  double ridge = 1e-8;
  double equivalence_tol = 1e-8;
  std::string out = "out";
  bool allow_fallback = false;
  bool draw = false;
  bool bootstrap = true;
  bool monte_carlo = false;
  bool no_bootstrap = false;
  bool no_monte_carlo = false;
  bool centre_on_mean = false;
  bool write_register = false;
  bool seed_set = false;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions o;
  o.tol = cfg.tol;
  o.ridge = cfg.ridge;
  return o;
}

fs::path output_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

// Register and schema either from files or from a scenario replicate.
struct Inputs {
  Register reg;
  CovariateSchema schema;
  std::optional<SimulatedRegister> simulated;
};

Inputs load_inputs(const RunConfig& cfg) {
  Inputs in;
  if (!cfg.scenario_path.empty()) {
    const auto sc = read_scenario_file(cfg.scenario_path);
    in.simulated = generate_register(sc, cfg.replicate);
    in.reg = in.simulated->reg;
    in.schema = in.simulated->schema;
    return in;
  }
  if (cfg.register_path.empty() || cfg.schema_path.empty()) {
    throw InputError("--register and --schema are required (or --scenario)");
  }
  in.schema = read_schema_file(cfg.schema_path);
  in.reg = read_register_file(cfg.register_path, in.schema);
  return in;
}

std::vector<DomainSpec> resolve_domains(const RunConfig& cfg, const Register& reg, const CovariateSchema& schema) {
  std::vector<std::string> requested = cfg.domains;
  if (requested.empty()) requested.emplace_back("full");
  std::vector<DomainSpec> out;
  for (const auto& token : requested) {
    if (token == "full") {
      out.push_back(full_register_domain(reg));
      continue;
    }
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InputError(fmt::format("domain '{}' must be 'full', 'column=level' or 'column=*'", token));
    }
    const std::string column = token.substr(0, eq);
    const std::string level = token.substr(eq + 1);
    if (level == "*") {
      auto part = domain_partition(reg, schema, column);
      out.insert(out.end(), part.begin(), part.end());
    } else {
      const Covariate* cov = schema.find(column);
      if (cov != nullptr && !cov->levels.empty() && !cov->level_index(level)) {
        throw InputError(fmt::format("unknown level '{}' for domain column '{}'", level, column));
      }
      out.push_back(domain_vector(reg, schema, column, level));
    }
  }
  return out;
}

struct Fitted {
  DesignMatrix design;
  FittedModel model;
  double seconds = 0.0;
};

Fitted fit_register(const RunConfig& cfg, const Register& reg, const CovariateSchema& schema) {
  const auto start = std::chrono::steady_clock::now();
  Fitted f;
  reg.validate(schema.category_count());
  f.design = build_design_matrix(reg, schema);
  f.model = fit(f.design, reg, static_cast<Eigen::Index>(schema.category_count()), fit_options(cfg));
  f.seconds = seconds_since(start);
  return f;
}

json fit_json(const FittedModel& m) {
  json j;
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  j["final_score_norm"] = m.final_score_norm;
  j["ridge_used"] = m.ridge_used;
  j["messages"] = m.diagnostics;
  return j;
}

// Maps model state to the exit-code policy; returns ok when nothing is flagged.
ExitCode model_status(const RunConfig& cfg, const FittedModel& m, bool cache_fallback = false) {
  if (!m.converged) return ExitCode::nonconvergence;
  if ((m.used_fallback() || cache_fallback) && !cfg.allow_fallback) return ExitCode::numerical_fallback;
  return ExitCode::ok;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

int cmd_fit(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const Fitted f = fit_register(cfg, in.reg, in.schema);
  const auto dir = output_dir(cfg);
  {
    auto out = open_out(dir / "coefficients.csv");
    write_coefficients(out, f.model.coefficients, f.design.column_names, in.schema.category_labels());
  }
  json j = fit_json(f.model);
  j["units"] = in.reg.size();
  j["sampled"] = in.reg.sample_size();
  j["fit_seconds"] = f.seconds;
  write_json(dir / "fit_diagnostics.json", j);
  fmt::print("fit: {} iterations, score norm {:.3e}, {}\n", f.model.iterations, f.model.final_score_norm,
             f.model.converged ? "converged" : "NOT converged");
  return static_cast<int>(model_status(cfg, f.model));
}

struct GmseRun {
  Inputs in;
  Fitted fitted;
  std::vector<DomainSpec> domains;
  GmseReport report;
  json diagnostics;
  bool fallback = false;
};

GmseRun run_gmse(const RunConfig& cfg) {
  if (cfg.engine != "standard" && cfg.engine != "kronecker" && cfg.engine != "both") {
    throw InputError(fmt::format("unknown engine '{}'", cfg.engine));
  }
  GmseRun run;
  run.in = load_inputs(cfg);
  run.fitted = fit_register(cfg, run.in.reg, run.in.schema);
  run.domains = resolve_domains(cfg, run.in.reg, run.in.schema);
  const auto& model = run.fitted.model;
  const auto& design = run.fitted.design;

  CacheOptions copt;
  copt.ridge = cfg.ridge;
  copt.allow_nonconverged = cfg.allow_fallback;
  json timing;
  timing["fit_seconds"] = run.fitted.seconds;
  std::vector<std::string> notes;

  Eigen::MatrixXd gmse;
  if (cfg.engine != "kronecker") {
    auto t0 = std::chrono::steady_clock::now();
    const PluginCache cache = build_plugin_cache(model, design, run.in.reg, copt);
    timing["cache_seconds"] = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    gmse = gmse_lin_all(cache, run.domains, &notes);
    timing["query_seconds"] = seconds_since(t0);
    timing["queries"] = run.domains.size();
    run.fallback = cache.diagnostics().used_fallback();
    for (const auto& m : cache.diagnostics().messages) notes.push_back(m);
    run.diagnostics["patterns"] = cache.patterns().count();
    if (cache.diagnostics().rcond > 0.0) run.diagnostics["condition_estimate"] = 1.0 / cache.diagnostics().rcond;
  }
  if (cfg.engine != "standard") {
    const auto t0 = std::chrono::steady_clock::now();
    Eigen::VectorXd pi(static_cast<Eigen::Index>(run.in.reg.size()));
    for (std::size_t i = 0; i < run.in.reg.size(); ++i) pi(static_cast<Eigen::Index>(i)) = run.in.reg.inclusion[i];
    const kron::KroneckerWorkspace ws(design.x, model.coefficients.categories(), pi, run.domains);
    const auto kf = kron::kf_gmse(ws, model.coefficients);
    timing["kronecker_seconds"] = seconds_since(t0);
    if (cfg.engine == "kronecker") {
      gmse = kf.gmse;
    } else {
      double worst = 0.0;
      for (Eigen::Index d = 0; d < gmse.rows(); ++d) {
        for (Eigen::Index k = 0; k < gmse.cols(); ++k) {
          const double scale = std::max(std::abs(gmse(d, k)), 1e-300);
          worst = std::max(worst, std::abs(kf.gmse(d, k) - gmse(d, k)) / scale);
        }
      }
      run.diagnostics["engine_max_relative_difference"] = worst;
      if (worst > cfg.equivalence_tol) {
        throw NumericalError(fmt::format(
            "standard and Kronecker engines differ by {:.3e} (relative, limit {:.0e}); -A_bar condition estimate {:.2e}",
            worst, cfg.equivalence_tol, run.diagnostics.value("condition_estimate", 0.0)));
      }
    }
  }

  ReportOptions ropt;
  ropt.draw_variant = cfg.draw;
  run.report = make_report(model, run.in.reg, run.domains, gmse, run.in.schema.category_labels(), ropt);
  for (auto& n : notes) run.report.notes.push_back(std::move(n));
  run.diagnostics["fit"] = fit_json(model);
  run.diagnostics["timing"] = timing;
  run.diagnostics["engine"] = cfg.engine;
  return run;
}

void write_gmse_outputs(const fs::path& dir, const GmseRun& run) {
  {
    auto out = open_out(dir / "gmse_report.csv");
    write_report_csv(out, run.report);
  }
  {
    auto out = open_out(dir / "cumulated_gmse.csv");
    write_cumulated_csv(out, run.report);
  }
  {
    auto out = open_out(dir / "cv_plot_data.csv");
    write_plot_data(out, run.report);
  }
  json j = run.diagnostics;
  j["notes"] = run.report.notes;
  write_json(dir / "diagnostics.json", j);
}

std::string percent(const std::optional<double>& v) { return v ? fmt::format("{:.2f}%", 100.0 * *v) : "-"; }

void print_report(const GmseReport& report) {
  fmt::print("{:<24} {:<32} {:>12} {:>7} {:>14} {:>8}", "domain", "category", "theta_hat", "n_kd", "gmse_lin", "cv");
  const bool boot = !report.rows.empty() && report.rows.front().gmse_boot.has_value();
  const bool mc = !report.rows.empty() && report.rows.front().gmse_mc.has_value();
  if (boot) fmt::print(" {:>14} {:>8}", "gmse_boot", "cv_boot");
  if (mc) fmt::print(" {:>14} {:>8}", "gmse_mc", "cv_mc");
  fmt::print("\n");
  for (const auto& r : report.rows) {
    fmt::print("{:<24} {:<32} {:>12.1f} {:>7} {:>14.1f} {:>8}", r.domain, r.category_label, r.theta_hat, r.n_kd,
               r.gmse_lin, percent(r.cv));
    if (boot) fmt::print(" {:>14.1f} {:>8}", r.gmse_boot.value_or(NAN), percent(r.cv_boot));
    if (mc) fmt::print(" {:>14.1f} {:>8}", r.gmse_mc.value_or(NAN), percent(r.cv_mc));
    fmt::print("\n");
  }
}

int cmd_gmse(const RunConfig& cfg) {
  const GmseRun run = run_gmse(cfg);
  write_gmse_outputs(output_dir(cfg), run);
  print_report(run.report);
  const auto& t = run.diagnostics["timing"];
  if (t.contains("cache_seconds")) {
    fmt::print("fit {:.3f}s, cache {:.3f}s, {} queries {:.4f}s\n", t["fit_seconds"].get<double>(),
               t["cache_seconds"].get<double>(), t["queries"].get<std::size_t>(), t["query_seconds"].get<double>());
  }
  return static_cast<int>(model_status(cfg, run.fitted.model, run.fallback));
}

ResamplingPlan plan_from(const RunConfig& cfg) {
  ResamplingPlan plan;
  plan.B = cfg.B;
  plan.G = cfg.G;
  plan.M = cfg.M;
  plan.seed = cfg.seed;
  plan.threads = cfg.threads;
  plan.centre_on_replicate_mean = cfg.centre_on_mean;
  return plan;
}

int cmd_validate(const RunConfig& cfg) {
  if (cfg.monte_carlo && cfg.scenario_path.empty()) throw InputError("MC requires simulation truth (use --scenario)");
  GmseRun run = run_gmse(cfg);
  const ResamplingPlan plan = plan_from(cfg);
  json resampling;
  if (cfg.bootstrap) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto est = bootstrap_gmse(run.fitted.design, run.in.reg, run.fitted.model, run.domains, plan,
                                    fit_options(cfg));
    resampling["bootstrap_seconds"] = seconds_since(t0);
    resampling["bootstrap_dropped"] = est.dropped;
    attach_bootstrap(run.report, est.gmse);
  }
  if (cfg.monte_carlo) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto est = mc_oracle(run.fitted.design, run.in.reg, run.in.simulated->truth, run.domains, plan,
                               fit_options(cfg), &run.fitted.model.coefficients);
    resampling["mc_seconds"] = seconds_since(t0);
    resampling["mc_dropped"] = est.dropped;
    attach_monte_carlo(run.report, est.gmse, est.centre);
  }
  resampling["B"] = plan.B;
  resampling["G"] = plan.G;
  resampling["M"] = plan.M;
  resampling["seed"] = plan.seed;
  run.diagnostics["resampling"] = resampling;
  write_gmse_outputs(output_dir(cfg), run);
  print_report(run.report);
  return static_cast<int>(model_status(cfg, run.fitted.model, run.fallback));
}

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.scenario_path.empty()) throw InputError("--scenario is required");
  SimulationScenario sc = read_scenario_file(cfg.scenario_path);
  if (cfg.seed_set) sc.seed = cfg.seed;
  if (cfg.B > 0) sc.plan.B = cfg.B;
  if (cfg.G > 0) sc.plan.G = cfg.G;
  if (cfg.M > 0) sc.plan.M = cfg.M;
  sc.plan.threads = cfg.threads;
  ComparisonOptions opt;
  if (cfg.S > 0) opt.replicates = cfg.S;
  if (cfg.no_bootstrap) opt.bootstrap = false;
  if (cfg.no_monte_carlo) opt.monte_carlo = false;
  opt.fit = fit_options(cfg);

  const auto dir = output_dir(cfg);
  if (cfg.write_register) {
    const auto sim = generate_register(sc, 0);
    auto out = open_out(dir / "register.csv");
    write_register(out, sim.reg);
    auto schema_out = open_out(dir / "schema.cfg");
    write_schema(schema_out, sim.schema);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const StudyReport study = run_comparison(sc, opt);
  {
    auto out = open_out(dir / "study.csv");
    write_study_csv(out, study);
  }
  {
    auto out = open_out(dir / "study_summary.csv");
    write_study_summary_csv(out, study);
  }
  json j;
  j["scenario"] = sc.name;
  j["seconds"] = seconds_since(t0);
  j["nonconverged_fits"] = study.nonconverged_fits;
  j["notes"] = study.notes;
  write_json(dir / "diagnostics.json", j);

  fmt::print("{:<12} {:<28} {:>5} {:>9} {:>9} {:>9}\n", "domain", "category", "est", "q25", "median", "q75");
  for (const auto& s : study.summary) {
    if (s.domain != "full") continue;
    fmt::print("{:<12} {:<28} {:>5} {:>8.2f}% {:>8.2f}% {:>8.2f}%\n", s.domain, s.label, s.estimator, 100 * s.q25,
               100 * s.median, 100 * s.q75);
  }
  if (study.nonconverged_fits > 0) return static_cast<int>(ExitCode::nonconvergence);
  if (study.used_fallback && !cfg.allow_fallback) return static_cast<int>(ExitCode::numerical_fallback);
  return 0;
}

// Formulation equivalence and finite-difference self-checks on random data.
int cmd_check(const RunConfig& cfg) {
  std::mt19937_64 gen(cfg.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  bool ok = true;
  auto report = [&](const std::string& name, double value, double limit) {
    const bool pass = value <= limit;
    ok = ok && pass;
    fmt::print("{} {:<40} {:.3e} (limit {:.0e})\n", pass ? "PASS" : "FAIL", name, value, limit);
  };

  const Eigen::Index N = 400, J = 4, K = 4;
  RowMatrix x(N, J);
  for (Eigen::Index i = 0; i < N; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < J; ++j) x(i, j) = unif(gen);
  }
  DesignMatrix design{x, {"(Intercept)", "x1", "x2", "x3"}};
  Eigen::MatrixXd truth_free(K - 1, J);
  for (Eigen::Index l = 0; l < K - 1; ++l) {
    for (Eigen::Index j = 0; j < J; ++j) truth_free(l, j) = 0.5 * unif(gen);
  }
  const Coefficients truth(truth_free);
  const auto p = probabilities(design, truth);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(N, K);
  Eigen::VectorXd lambda(N), pi = Eigen::VectorXd::Constant(N, 0.5);
  Rng rng(cfg.seed);
  for (Eigen::Index i = 0; i < N; ++i) {
    lambda(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    y(i, rng.categorical(p.row(i).data(), K, p.rows())) = 1.0;
  }
  const auto model = fit(design, y, lambda, fit_options(cfg));
  report("score at the MLE / n", model.final_score_norm / lambda.sum(), cfg.tol);

  const double h = 1e-6;
  const Eigen::VectorXd theta = truth.as_vector();
  const Eigen::VectorXd g = score(design, y, lambda, truth);
  double worst = 0.0;
  for (Eigen::Index t = 0; t < theta.size(); ++t) {
    Eigen::VectorXd up = theta, down = theta;
    up(t) += h;
    down(t) -= h;
    const double fd = (log_likelihood(design, y, lambda, Coefficients::from_vector(up, K, J)) -
                       log_likelihood(design, y, lambda, Coefficients::from_vector(down, K, J))) /
                      (2 * h);
    worst = std::max(worst, std::abs(fd - g(t)) / std::max(1.0, std::abs(g(t))));
  }
  report("score vs finite differences", worst, 1e-5);

  const auto cache = build_plugin_cache(model, design, pi);
  std::vector<DomainSpec> domains{{"all", Eigen::VectorXd::Ones(N), DomainKind::full_register, ""}};
  DomainSpec half{"half", Eigen::VectorXd::Zero(N), DomainKind::external, ""};
  for (Eigen::Index i = 0; i < N; i += 2) half.membership(i) = 1.0;
  domains.push_back(half);
  const Eigen::MatrixXd standard = gmse_lin_all(cache, domains);
  const kron::KroneckerWorkspace ws(x, K, pi, domains, {173});
  const auto kf = kron::kf_gmse(ws, model.coefficients);
  report("Kronecker vs standard engine", ((kf.gmse - standard).array().abs() / standard.array()).maxCoeff(), 1e-8);
  return ok ? 0 : static_cast<int>(ExitCode::numerical_fallback);
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--register", cfg.register_path, "register CSV");
  sub->add_option("--schema", cfg.schema_path, "schema INI");
  sub->add_option("--scenario", cfg.scenario_path, "simulation scenario (instead of register and schema)");
  sub->add_option("--replicate", cfg.replicate, "scenario replicate to generate");
  sub->add_option("--tol", cfg.tol, "Newton convergence tolerance (times n)");
  sub->add_option("--ridge", cfg.ridge, "ridge for singular Hessians");
  sub->add_option("--out", cfg.out, "output directory");
  sub->add_option("--seed", cfg.seed, "random seed");
  sub->add_option("--threads", cfg.threads, "worker threads (0: all cores)");
  sub->add_flag("--deterministic", cfg.deterministic, "fixed-order reductions (always on)");
  sub->add_flag("--allow-fallback", cfg.allow_fallback, "exit 0 even when a numerical fallback was used");
}

void add_gmse_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--engine", cfg.engine, "standard | kronecker | both")
      ->check(CLI::IsMember({"standard", "kronecker", "both"}));
  sub->add_option("--domains", cfg.domains, "full, column=level or column=*; repeatable")->delimiter('\0');
  sub->add_flag("--draw", cfg.draw, "also report the multinomial-draw variant");
  sub->add_option("--equivalence-tol", cfg.equivalence_tol, "relative tolerance asserted by --engine both");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Register totals for categorical outcomes with linearised GMSE"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* fit_cmd = app.add_subcommand("fit", "fit the multinomial model and write coefficients");
  add_common(fit_cmd, cfg);

  auto* gmse_cmd = app.add_subcommand("gmse", "totals with linearised GMSE and CV per domain");
  add_common(gmse_cmd, cfg);
  add_gmse_options(gmse_cmd, cfg);

  auto* validate_cmd = app.add_subcommand("validate", "gmse report augmented with bootstrap and Monte-Carlo GMSE");
  add_common(validate_cmd, cfg);
  add_gmse_options(validate_cmd, cfg);
  validate_cmd->add_option("--B", cfg.B, "bootstrap replicates");
  validate_cmd->add_option("--G", cfg.G, "Monte-Carlo sample replicates");
  validate_cmd->add_option("--M", cfg.M, "Monte-Carlo outcome replicates");
  validate_cmd->add_flag("!--no-bootstrap", cfg.bootstrap, "skip the bootstrap");
  validate_cmd->add_flag("--mc", cfg.monte_carlo, "run the Monte-Carlo benchmark (needs --scenario)");
  validate_cmd->add_flag("--centre-on-mean", cfg.centre_on_mean, "bootstrap variance about the replicate mean");

  auto* simulate_cmd = app.add_subcommand("simulate", "run a scenario study (Lin vs Boot vs MC)");
  add_common(simulate_cmd, cfg);
  simulate_cmd->add_option("--S", cfg.S, "replicated populations");
  simulate_cmd->add_option("--B", cfg.B, "bootstrap replicates");
  simulate_cmd->add_option("--G", cfg.G, "Monte-Carlo sample replicates");
  simulate_cmd->add_option("--M", cfg.M, "Monte-Carlo outcome replicates");
  simulate_cmd->add_flag("--no-bootstrap", cfg.no_bootstrap, "skip the bootstrap");
  simulate_cmd->add_flag("--no-mc", cfg.no_monte_carlo, "skip the Monte-Carlo benchmark");
  simulate_cmd->add_flag("--write-register", cfg.write_register, "also write replicate 0 as register.csv");

  auto* check_cmd = app.add_subcommand("check", "engine equivalence and finite-difference self-checks");
  check_cmd->add_option("--seed", cfg.seed, "random seed");
  check_cmd->add_option("--tol", cfg.tol, "Newton convergence tolerance (times n)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::input_error);
  }

  // simulate keeps scenario values unless overridden on the command line
  if (simulate_cmd->parsed()) {
    cfg.seed_set = simulate_cmd->count("--seed") > 0;
    if (simulate_cmd->count("--B") == 0) cfg.B = 0;
    if (simulate_cmd->count("--G") == 0) cfg.G = 0;
    if (simulate_cmd->count("--M") == 0) cfg.M = 0;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(cfg);
    if (gmse_cmd->parsed()) return cmd_gmse(cfg);
    if (validate_cmd->parsed()) return cmd_validate(cfg);
    if (simulate_cmd->parsed()) return cmd_simulate(cfg);
    if (check_cmd->parsed()) return cmd_check(cfg);
  } catch (const InputError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(ExitCode::input_error);
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return static_cast<int>(ExitCode::numerical_fallback);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(ExitCode::input_error);
  }
  return 0;
}
