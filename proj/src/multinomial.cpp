#include "regmse/multinomial.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <string_view>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "regmse/csv.hpp"
#include "regmse/error.hpp"

namespace regmse {

Coefficients::Coefficients(Eigen::MatrixXd free_block) : free_(std::move(free_block)) {
  if (!free_.allFinite()) throw NumericalError("coefficients contain non-finite entries");
}

Coefficients Coefficients::zeros(Eigen::Index categories, Eigen::Index width) {
  return Coefficients(Eigen::MatrixXd::Zero(categories - 1, width));
}

Coefficients Coefficients::from_vector(const Eigen::VectorXd& theta, Eigen::Index categories, Eigen::Index width) {
  if (theta.size() != (categories - 1) * width) {
    throw std::invalid_argument("coefficient vector has the wrong length");
  }
  Eigen::MatrixXd block(categories - 1, width);
  for (Eigen::Index l = 0; l < categories - 1; ++l) block.row(l) = theta.segment(l * width, width).transpose();
  return Coefficients(std::move(block));
}

Coefficients Coefficients::from_expanded(const Eigen::MatrixXd& full) {
  if (full.rows() < 2) throw InputError("coefficient table needs at least two categories");
  if (full.row(full.rows() - 1).cwiseAbs().maxCoeff() > 0.0) {
    throw InputError("baseline category coefficients must all be zero");
  }
  return Coefficients(full.topRows(full.rows() - 1));
}

Eigen::MatrixXd Coefficients::expanded() const {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(categories(), width());
  full.topRows(free_.rows()) = free_;
  return full;
}

Eigen::VectorXd Coefficients::as_vector() const {
  Eigen::VectorXd theta(free_.size());
  for (Eigen::Index l = 0; l < free_.rows(); ++l) theta.segment(l * width(), width()) = free_.row(l).transpose();
  return theta;
}

namespace {

struct RowLinear {
  ProbabilityMatrix p;
  Eigen::MatrixXd eta;         // R x (K-1)
  Eigen::VectorXd log_norm;    // log(1 + sum_k exp eta_k)
};

RowLinear evaluate(const RowMatrix& x, const Coefficients& beta) {
  if (x.cols() != beta.width()) {
    throw std::invalid_argument(fmt::format("design has {} columns, coefficients expect {}", x.cols(), beta.width()));
  }
  const Eigen::Index R = x.rows();
  const Eigen::Index K = beta.categories();
  RowLinear out;
  out.eta = x * beta.free_block().transpose();
  out.p.resize(R, K);
  out.log_norm.resize(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    double top = 0.0;  // baseline linear predictor
    for (Eigen::Index k = 0; k < K - 1; ++k) {
      const double v = out.eta(r, k);
      if (!std::isfinite(v)) {
        throw NumericalError(fmt::format("non-finite linear predictor for unit {} category {}", r, k + 1));
      }
      top = std::max(top, v);
    }
    double total = std::exp(-top);
    out.p(r, K - 1) = total;
    for (Eigen::Index k = 0; k < K - 1; ++k) {
      const double e = std::exp(out.eta(r, k) - top);
      out.p(r, k) = e;
      total += e;
    }
    out.p.row(r) /= total;
    out.log_norm(r) = top + std::log(total);
  }
  return out;
}

}  // namespace

ProbabilityMatrix probabilities(const RowMatrix& x, const Coefficients& beta) { return evaluate(x, beta).p; }

double log_likelihood(const WeightedRows& rows, const Coefficients& beta) {
  const auto lin = evaluate(rows.x, beta);
  const Eigen::Index K = beta.categories();
  double ll = 0.0;
  for (Eigen::Index r = 0; r < rows.x.rows(); ++r) {
    if (rows.weight(r) == 0.0) continue;
    double term = -rows.weight(r) * lin.log_norm(r);
    for (Eigen::Index k = 0; k < K - 1; ++k) term += rows.counts(r, k) * lin.eta(r, k);
    ll += term;
  }
  return ll;
}

namespace {

Eigen::VectorXd score_from(const WeightedRows& rows, const ProbabilityMatrix& p) {
  const Eigen::Index J = rows.x.cols();
  const Eigen::Index K = p.cols();
  Eigen::VectorXd g(J * (K - 1));
  for (Eigen::Index l = 0; l < K - 1; ++l) {
    const Eigen::VectorXd resid = rows.counts.col(l) - rows.weight.cwiseProduct(p.col(l));
    g.segment(l * J, J).noalias() = rows.x.transpose() * resid;
  }
  return g;
}

}  // namespace

Eigen::VectorXd score(const WeightedRows& rows, const Coefficients& beta) {
  return score_from(rows, probabilities(rows.x, beta));
}

Eigen::MatrixXd hessian(const RowMatrix& x, const Eigen::VectorXd& weights, const ProbabilityMatrix& p) {
  const Eigen::Index J = x.cols();
  const Eigen::Index K = p.cols();
  const Eigen::Index H = J * (K - 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(H, H);
  Eigen::VectorXd c(x.rows());
  for (Eigen::Index l = 0; l < K - 1; ++l) {
    for (Eigen::Index m = l; m < K - 1; ++m) {
      if (l == m) {
        c = weights.cwiseProduct(p.col(l).cwiseProduct((1.0 - p.col(l).array()).matrix()));
        a.block(l * J, m * J, J, J).noalias() = -(x.transpose() * c.asDiagonal() * x);
      } else {
        c = weights.cwiseProduct(p.col(l).cwiseProduct(p.col(m)));
        a.block(l * J, m * J, J, J).noalias() = x.transpose() * c.asDiagonal() * x;
        a.block(m * J, l * J, J, J) = a.block(l * J, m * J, J, J).transpose();
      }
    }
  }
  return a;
}

namespace {

WeightedRows unit_rows(const DesignMatrix& design, const Eigen::MatrixXd& y, const Eigen::VectorXd& lambda) {
  if (y.rows() != design.rows() || lambda.size() != design.rows()) {
    throw std::invalid_argument("design, outcome and weight sizes differ");
  }
  WeightedRows rows;
  rows.x = design.x;
  rows.weight = lambda;
  rows.counts = lambda.asDiagonal() * y;
  return rows;
}

}  // namespace

double log_likelihood(const DesignMatrix& design, const Eigen::MatrixXd& y, const Eigen::VectorXd& lambda,
                      const Coefficients& beta) {
  return log_likelihood(unit_rows(design, y, lambda), beta);
}

Eigen::VectorXd score(const DesignMatrix& design, const Eigen::MatrixXd& y, const Eigen::VectorXd& lambda,
                      const Coefficients& beta) {
  return score(unit_rows(design, y, lambda), beta);
}

Eigen::MatrixXd hessian(const DesignMatrix& design, const Eigen::VectorXd& weights, const Coefficients& beta) {
  return hessian(design.x, weights, probabilities(design.x, beta));
}

CovariatePatterns find_patterns(const RowMatrix& x) {
  CovariatePatterns out;
  const Eigen::Index N = x.rows();
  const Eigen::Index J = x.cols();
  const std::size_t bytes = static_cast<std::size_t>(J) * sizeof(double);
  std::unordered_map<std::string, Eigen::Index> seen;
  std::vector<Eigen::Index> first_unit;
  out.unit_pattern.resize(static_cast<std::size_t>(N));
  std::string key(bytes, '\0');
  for (Eigen::Index i = 0; i < N; ++i) {
    std::memcpy(key.data(), x.row(i).data(), bytes);
    auto [it, inserted] = seen.try_emplace(key, static_cast<Eigen::Index>(first_unit.size()));
    if (inserted) first_unit.push_back(i);
    out.unit_pattern[static_cast<std::size_t>(i)] = it->second;
  }
  out.rows.resize(static_cast<Eigen::Index>(first_unit.size()), J);
  for (std::size_t p = 0; p < first_unit.size(); ++p) out.rows.row(static_cast<Eigen::Index>(p)) = x.row(first_unit[p]);
  return out;
}

WeightedRows aggregate(const CovariatePatterns& patterns, const Eigen::VectorXd& weight,
                       const std::vector<int>& outcome, Eigen::Index categories) {
  WeightedRows rows;
  rows.x = patterns.rows;
  rows.weight = Eigen::VectorXd::Zero(patterns.count());
  rows.counts = Eigen::MatrixXd::Zero(patterns.count(), categories);
  for (std::size_t i = 0; i < patterns.unit_pattern.size(); ++i) {
    const double w = weight(static_cast<Eigen::Index>(i));
    if (w == 0.0) continue;
    const auto p = patterns.unit_pattern[i];
    rows.weight(p) += w;
    rows.counts(p, outcome[i] - 1) += w;
  }
  return rows;
}

namespace {

constexpr double kMaxStep = 5.0;

FitResult newton(const WeightedRows& rows, const FitOptions& options, const Coefficients* start) {
  const Eigen::Index J = rows.x.cols();
  const Eigen::Index K = rows.counts.cols();
  const Eigen::Index H = J * (K - 1);
  const double n = rows.weight.sum();

  const Eigen::VectorXd category_totals = rows.counts.colwise().sum().transpose();
  std::vector<Eigen::Index> missing;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (category_totals(k) <= 0.0) missing.push_back(k + 1);
  }
  if (!missing.empty()) {
    throw SeparationError(fmt::format("categories absent from the sample: {}", fmt::join(missing, ", ")));
  }

  FitResult result;
  // Start from the marginal log-odds on the intercept.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(H);
  const bool has_intercept = (rows.x.col(0).array() == 1.0).all();
  if (start) {
    if (start->categories() != K || start->width() != J) throw std::invalid_argument("start does not match the rows");
    theta = start->as_vector();
  } else if (has_intercept) {
    for (Eigen::Index l = 0; l < K - 1; ++l) theta(l * J) = std::log(category_totals(l) / category_totals(K - 1));
  }

  auto coefficients = [&](const Eigen::VectorXd& t) { return Coefficients::from_vector(t, K, J); };
  double ll = log_likelihood(rows, coefficients(theta));
  const double threshold = options.tol * std::max(n, 1.0);

  for (int iter = 0;; ++iter) {
    const auto lin = evaluate(rows.x, coefficients(theta));
    const Eigen::VectorXd g = score_from(rows, lin.p);
    result.final_score_norm = g.cwiseAbs().maxCoeff();
    result.iterations = iter;
    if (result.final_score_norm <= threshold) {
      result.converged = true;
      break;
    }
    if (iter >= options.max_iter) {
      result.diagnostics.push_back(fmt::format("Newton stopped after {} iterations with score norm {:.3e}", iter,
                                               result.final_score_norm));
      break;
    }

    Eigen::MatrixXd info = -hessian(rows.x, rows.weight, lin.p);
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    double ridge = 0.0;
    if (llt.info() != Eigen::Success) {
      ridge = options.ridge > 0.0 ? options.ridge : 1e-8;
      for (int attempt = 0; attempt < 12; ++attempt, ridge *= 10.0) {
        llt.compute(info + ridge * Eigen::MatrixXd::Identity(H, H));
        if (llt.info() == Eigen::Success) break;
      }
      if (llt.info() != Eigen::Success) throw NumericalError("Hessian is not invertible even with ridge");
      result.ridge_used = std::max(result.ridge_used, ridge);
      result.diagnostics.push_back(fmt::format("iteration {}: singular Hessian, ridge {:.1e} applied", iter, ridge));
    }
    // Newton direction first, then steepest ascent; both capped in length so
    // that near-separated coefficients drift instead of jumping.
    bool moved = false;
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      Eigen::VectorXd step = attempt == 0 ? Eigen::VectorXd(llt.solve(g)) : g;
      const double longest = step.cwiseAbs().maxCoeff();
      if (!(longest > 0.0) || !std::isfinite(longest)) continue;
      if (longest > kMaxStep) step *= kMaxStep / longest;
      double t = 1.0;
      Eigen::VectorXd candidate = theta + step;
      double candidate_ll = log_likelihood(rows, coefficients(candidate));
      while (!(candidate_ll > ll) && t > 1e-10) {
        t *= 0.5;
        candidate = theta + t * step;
        candidate_ll = log_likelihood(rows, coefficients(candidate));
      }
      if (candidate_ll > ll) {
        theta = std::move(candidate);
        ll = candidate_ll;
        moved = true;
      }
    }
    if (!moved) {
      result.diagnostics.push_back(fmt::format("iteration {}: line search failed", iter));
      break;
    }
  }
  result.coefficients = coefficients(theta);
  return result;
}

}  // namespace

FitResult fit_rows(const WeightedRows& rows, const FitOptions& options) { return newton(rows, options, nullptr); }

FitResult fit_rows(const WeightedRows& rows, const FitOptions& options, const Coefficients& start) {
  return newton(rows, options, &start);
}

namespace {

FittedModel finish(const DesignMatrix& design, FitResult&& fitted) {
  FittedModel model;
  model.fitted_probabilities = probabilities(design.x, fitted.coefficients);
  model.coefficients = std::move(fitted.coefficients);
  model.iterations = fitted.iterations;
  model.final_score_norm = fitted.final_score_norm;
  model.ridge_used = fitted.ridge_used;
  model.converged = fitted.converged;
  model.diagnostics = std::move(fitted.diagnostics);
  return model;
}

}  // namespace

FittedModel fit(const DesignMatrix& design, const Eigen::MatrixXd& y, const Eigen::VectorXd& lambda,
                const FitOptions& options) {
  const auto patterns = find_patterns(design.x);
  std::vector<int> outcome(static_cast<std::size_t>(design.rows()), 0);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    if (lambda(i) == 0.0) continue;
    Eigen::Index k = 0;
    if (y.row(i).maxCoeff(&k) != 1.0 || y.row(i).sum() != 1.0) {
      throw InputError(fmt::format("outcome row {} is not one-hot", i));
    }
    outcome[static_cast<std::size_t>(i)] = static_cast<int>(k) + 1;
  }
  return finish(design, fit_rows(aggregate(patterns, lambda, outcome, y.cols()), options));
}

FittedModel fit(const DesignMatrix& design, const Register& reg, Eigen::Index categories, const FitOptions& options) {
  const auto patterns = find_patterns(design.x);
  Eigen::VectorXd lambda(static_cast<Eigen::Index>(reg.size()));
  for (std::size_t i = 0; i < reg.size(); ++i) lambda(static_cast<Eigen::Index>(i)) = reg.sampled[i];
  return finish(design, fit_rows(aggregate(patterns, lambda, reg.outcome, categories), options));
}

FittedModel model_from_coefficients(const DesignMatrix& design, const Coefficients& beta) {
  FitResult given;
  given.coefficients = beta;
  given.converged = true;
  return finish(design, std::move(given));
}

Eigen::VectorXd predict_totals(const FittedModel& model, const DomainSpec& domain) {
  if (domain.membership.size() != model.fitted_probabilities.rows()) {
    throw std::invalid_argument("domain and model cover different registers");
  }
  return model.fitted_probabilities.transpose() * domain.membership;
}

void write_coefficients(std::ostream& out, const Coefficients& beta, const std::vector<std::string>& column_names,
                        const std::vector<std::string>& category_labels) {
  const Eigen::MatrixXd full = beta.expanded();
  std::vector<std::string> header{"covariate"};
  for (Eigen::Index k = 0; k < full.rows(); ++k) {
    header.push_back(static_cast<std::size_t>(k) < category_labels.size() ? category_labels[static_cast<std::size_t>(k)]
                                                                           : std::to_string(k + 1));
  }
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index j = 0; j < full.cols(); ++j) {
    std::vector<std::string> row{static_cast<std::size_t>(j) < column_names.size()
                                     ? column_names[static_cast<std::size_t>(j)]
                                     : fmt::format("x{}", j)};
    for (Eigen::Index k = 0; k < full.rows(); ++k) row.push_back(csv::format_double(full(k, j)));
    rows.push_back(std::move(row));
  }
  csv::write(out, header, rows);
}

CoefficientTable read_coefficients(std::istream& in, const std::string& source_name) {
  const auto table = csv::read(in, source_name);
  if (table.header.size() < 3) throw InputError(fmt::format("{}: need a name column and at least two categories", source_name));
  CoefficientTable out;
  out.category_labels.assign(table.header.begin() + 1, table.header.end());
  const auto K = static_cast<Eigen::Index>(out.category_labels.size());
  const auto J = static_cast<Eigen::Index>(table.rows.size());
  if (J == 0) throw InputError(fmt::format("{}: no coefficient rows", source_name));
  Eigen::MatrixXd full(K, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto& row = table.rows[static_cast<std::size_t>(j)];
    out.column_names.push_back(row[0]);
    for (Eigen::Index k = 0; k < K; ++k) {
      full(k, j) = csv::parse_double(row[static_cast<std::size_t>(k + 1)],
                                     fmt::format("{}:{}", source_name, table.line_numbers[static_cast<std::size_t>(j)]));
    }
  }
  out.coefficients = Coefficients::from_expanded(full);
  return out;
}

CoefficientTable read_coefficients_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open coefficients '{}'", path));
  return read_coefficients(in, path);
}

}  // namespace regmse
