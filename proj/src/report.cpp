#include "regmse/report.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "regmse/csv.hpp"

namespace regmse {

GmseRow& GmseReport::at(std::size_t domain, std::size_t category_index) {
  return rows.at(domain * categories() + category_index);
}

const GmseRow& GmseReport::at(std::size_t domain, std::size_t category_index) const {
  return rows.at(domain * categories() + category_index);
}

Eigen::MatrixXd gmse_lin_all(const PluginCache& cache, const std::vector<DomainSpec>& domains,
                             std::vector<std::string>* notes) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(domains.size()), cache.categories());
  for (std::size_t d = 0; d < domains.size(); ++d) {
    out.row(static_cast<Eigen::Index>(d)) = gmse_lin(cache, domains[d], notes).transpose();
  }
  return out;
}

GmseReport make_report(const FittedModel& model, const Register& reg, const std::vector<DomainSpec>& domains,
                       const Eigen::MatrixXd& gmse, const std::vector<std::string>& category_labels,
                       const ReportOptions& options) {
  const auto K = static_cast<Eigen::Index>(category_labels.size());
  if (gmse.rows() != static_cast<Eigen::Index>(domains.size()) || gmse.cols() != K) {
    throw std::invalid_argument("GMSE matrix does not match domains and categories");
  }
  if (model.fitted_probabilities.cols() != K) throw std::invalid_argument("model has a different category count");

  GmseReport report;
  report.category_labels = category_labels;
  for (const auto& domain : domains) {
    const Eigen::VectorXd theta = predict_totals(model, domain);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (std::size_t i = 0; i < reg.size(); ++i) {
      if (reg.sampled[i] && reg.outcome[i] >= 1) counts(reg.outcome[i] - 1) += domain.membership(static_cast<Eigen::Index>(i));
    }
    const Eigen::Index d = static_cast<Eigen::Index>(report.domains.size());
    const Eigen::VectorXd lin = gmse.row(d).transpose();
    Eigen::VectorXd draw;
    if (options.draw_variant) draw = gmse_draw_variant(lin, model.fitted_probabilities, domain);

    const double size = domain.size();
    if (!domain.warning.empty()) report.notes.push_back(domain.warning);
    for (Eigen::Index k = 0; k < K; ++k) {
      GmseRow row;
      row.domain = domain.name;
      row.category = static_cast<std::size_t>(k + 1);
      row.category_label = category_labels[static_cast<std::size_t>(k)];
      row.theta_hat = theta(k);
      row.n_kd = static_cast<long long>(std::llround(counts(k)));
      row.gmse_lin = lin(k);
      if (options.draw_variant) row.gmse_draw = draw(k);
      if (size == 0.0) row.flags.emplace_back("empty_domain");
      if (row.theta_hat > 0.0) {
        row.cv = cv(row.theta_hat, row.gmse_lin);
        if (row.n_kd == 0) row.flags.emplace_back("no_sampled_support");
      } else {
        row.flags.emplace_back("cv_undefined");
      }
      report.rows.push_back(std::move(row));
    }
    report.domains.push_back({domain.name, size, cumulated_gmse(lin)});
  }
  return report;
}

void attach_bootstrap(GmseReport& report, const Eigen::MatrixXd& gmse_boot) {
  const std::size_t K = report.categories();
  if (static_cast<std::size_t>(gmse_boot.rows()) != report.domains.size() ||
      static_cast<std::size_t>(gmse_boot.cols()) != K) {
    throw std::invalid_argument("bootstrap matrix does not match the report");
  }
  for (std::size_t d = 0; d < report.domains.size(); ++d) {
    for (std::size_t k = 0; k < K; ++k) {
      auto& row = report.at(d, k);
      row.gmse_boot = gmse_boot(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
      if (row.theta_hat > 0.0) row.cv_boot = cv(row.theta_hat, *row.gmse_boot);
    }
  }
}

void attach_monte_carlo(GmseReport& report, const Eigen::MatrixXd& gmse_mc, const Eigen::MatrixXd& truth) {
  const std::size_t K = report.categories();
  if (static_cast<std::size_t>(gmse_mc.rows()) != report.domains.size() ||
      static_cast<std::size_t>(gmse_mc.cols()) != K || truth.rows() != gmse_mc.rows() ||
      truth.cols() != gmse_mc.cols()) {
    throw std::invalid_argument("Monte-Carlo matrices do not match the report");
  }
  for (std::size_t d = 0; d < report.domains.size(); ++d) {
    for (std::size_t k = 0; k < K; ++k) {
      auto& row = report.at(d, k);
      const auto dd = static_cast<Eigen::Index>(d);
      const auto kk = static_cast<Eigen::Index>(k);
      row.gmse_mc = gmse_mc(dd, kk);
      if (truth(dd, kk) > 0.0) row.cv_mc = cv(truth(dd, kk), gmse_mc(dd, kk));
    }
  }
}

namespace {

std::string cell(const std::optional<double>& value) { return value ? csv::format_double(*value) : std::string(); }

std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (const auto& f : flags) {
    if (!out.empty()) out += ';';
    out += f;
  }
  return out;
}

}  // namespace

void write_report_csv(std::ostream& out, const GmseReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(report.rows.size());
  for (const auto& r : report.rows) {
    rows.push_back({r.domain, std::to_string(r.category), r.category_label, csv::format_double(r.theta_hat),
                    std::to_string(r.n_kd), csv::format_double(r.gmse_lin), cell(r.cv), cell(r.gmse_draw),
                    cell(r.gmse_boot), cell(r.cv_boot), cell(r.gmse_mc), cell(r.cv_mc), join_flags(r.flags)});
  }
  csv::write(out,
             {"domain", "category", "label", "theta_hat", "n_kd", "gmse_lin", "cv", "gmse_draw", "gmse_boot",
              "cv_boot", "gmse_mc", "cv_mc", "flags"},
             rows);
}

void write_cumulated_csv(std::ostream& out, const GmseReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : report.domains) {
    rows.push_back({d.domain, csv::format_double(d.size), csv::format_double(d.cumulated_gmse)});
  }
  csv::write(out, {"domain", "size", "cumulated_gmse"}, rows);
}

void write_plot_data(std::ostream& out, const GmseReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    if (!r.cv) continue;
    const std::string log_n = r.n_kd > 0 ? csv::format_double(std::log10(static_cast<double>(r.n_kd))) : "";
    const std::string log_cv = *r.cv > 0.0 ? csv::format_double(std::log10(*r.cv)) : "";
    rows.push_back({r.domain, std::to_string(r.category), r.category_label, std::to_string(r.n_kd),
                    csv::format_double(r.theta_hat), csv::format_double(*r.cv), log_n, log_cv});
  }
  csv::write(out, {"domain", "category", "label", "n_kd", "theta_hat", "cv", "log10_n_kd", "log10_cv"}, rows);
}

}  // namespace regmse
