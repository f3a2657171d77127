#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regmse/gmse_linear.hpp"
#include "regmse/multinomial.hpp"
#include "regmse/register.hpp"

namespace regmse {

/// One (domain, category) cell of a GMSE report. CVs are fractions.
struct GmseRow {
  std::string domain;
  std::size_t category = 0;  // 1-based
  std::string category_label;
  double theta_hat = 0.0;
  long long n_kd = 0;
  double gmse_lin = 0.0;
  std::optional<double> cv;
  std::optional<double> gmse_draw;
  std::optional<double> gmse_boot;
  std::optional<double> cv_boot;
  std::optional<double> gmse_mc;
  std::optional<double> cv_mc;
  std::vector<std::string> flags;
};

struct DomainTotal {
  std::string domain;
  double size = 0.0;
  double cumulated_gmse = 0.0;
};

/// Rows are ordered by domain (request order), then category.
struct GmseReport {
  std::vector<std::string> category_labels;
  std::vector<GmseRow> rows;
  std::vector<DomainTotal> domains;
  std::vector<std::string> notes;

  [[nodiscard]] std::size_t categories() const { return category_labels.size(); }
  [[nodiscard]] GmseRow& at(std::size_t domain, std::size_t category_index);
  [[nodiscard]] const GmseRow& at(std::size_t domain, std::size_t category_index) const;
};

/// D x K matrix of gmse_lin values, one row per domain.
Eigen::MatrixXd gmse_lin_all(const PluginCache& cache, const std::vector<DomainSpec>& domains,
                             std::vector<std::string>* notes = nullptr);

struct ReportOptions {
  bool draw_variant = false;
};

/// Assembles totals, sample counts, gmse_lin and CVs. `gmse` is D x K.
GmseReport make_report(const FittedModel& model, const Register& reg, const std::vector<DomainSpec>& domains,
                       const Eigen::MatrixXd& gmse, const std::vector<std::string>& category_labels,
                       const ReportOptions& options = {});

/// Fills gmse_boot / cv_boot (CV relative to theta_hat).
void attach_bootstrap(GmseReport& report, const Eigen::MatrixXd& gmse_boot);

/// Fills gmse_mc / cv_mc; `truth` holds the expected totals sum gamma p.
void attach_monte_carlo(GmseReport& report, const Eigen::MatrixXd& gmse_mc, const Eigen::MatrixXd& truth);

/// Columns: domain, category, label, theta_hat, n_kd, gmse_lin, cv, gmse_draw,
/// gmse_boot, cv_boot, gmse_mc, cv_mc, flags. Absent values are empty cells.
void write_report_csv(std::ostream& out, const GmseReport& report);

/// domain, size, cumulated_gmse
void write_cumulated_csv(std::ostream& out, const GmseReport& report);

/// cv against n_kd per cell, with log10 columns for plotting.
void write_plot_data(std::ostream& out, const GmseReport& report);

}  // namespace regmse
