#include "regmse/schema.hpp"

#include <fstream>
#include <ostream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "regmse/error.hpp"

namespace regmse {

namespace pt = boost::property_tree;

std::vector<std::string> split_list(std::string_view text, char separator) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(separator, start);
    auto piece = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    while (!piece.empty() && (piece.front() == ' ' || piece.front() == '\t')) piece.remove_prefix(1);
    while (!piece.empty() && (piece.back() == ' ' || piece.back() == '\t')) piece.remove_suffix(1);
    if (!piece.empty()) out.emplace_back(piece);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

namespace {

CovariateRole parse_role(const std::string& text, const std::string& where) {
  if (text == "predictor") return CovariateRole::predictor;
  if (text == "external_domain") return CovariateRole::external_domain;
  if (text == "identifier") return CovariateRole::identifier;
  throw InputError(fmt::format("{}: unknown role '{}'", where, text));
}

std::string role_name(CovariateRole role) {
  switch (role) {
    case CovariateRole::predictor: return "predictor";
    case CovariateRole::external_domain: return "external_domain";
    case CovariateRole::identifier: return "identifier";
  }
  return "predictor";
}

}  // namespace

CovariateSchema read_schema(std::istream& in, const std::string& source_name) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(fmt::format("{}: {}", source_name, e.message()));
  }

  std::vector<std::string> labels;
  std::vector<Covariate> covariates;
  for (const auto& [section, body] : tree) {
    const auto where = fmt::format("{} [{}]", source_name, section);
    if (section == "outcome") {
      labels = split_list(body.get<std::string>("labels", ""));
      if (labels.empty()) {
        const int k = body.get<int>("categories", 0);
        for (int c = 1; c <= k; ++c) labels.push_back(std::to_string(c));
      }
    } else if (section.rfind("covariate.", 0) == 0) {
      Covariate cov;
      cov.name = section.substr(std::string("covariate.").size());
      const auto kind = body.get<std::string>("kind", "categorical");
      if (kind == "categorical") {
        cov.kind = CovariateKind::categorical;
      } else if (kind == "binary") {
        cov.kind = CovariateKind::binary;
      } else {
        throw InputError(fmt::format("{}: unknown kind '{}'", where, kind));
      }
      cov.levels = split_list(body.get<std::string>("levels", cov.kind == CovariateKind::binary ? "0;1" : ""));
      cov.role = parse_role(body.get<std::string>("role", "predictor"), where);
      if (auto ref = body.get_optional<std::string>("reference")) {
        auto idx = cov.level_index(*ref);
        if (!idx) throw InputError(fmt::format("{}: reference '{}' is not a declared level", where, *ref));
        cov.reference = *idx;
      }
      covariates.push_back(std::move(cov));
    } else {
      throw InputError(fmt::format("{}: unexpected section", where));
    }
  }
  if (labels.empty()) throw InputError(fmt::format("{}: missing [outcome] section", source_name));
  return CovariateSchema(std::move(covariates), std::move(labels));
}

CovariateSchema read_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open schema '{}'", path));
  return read_schema(in, path);
}

void write_schema(std::ostream& out, const CovariateSchema& schema) {
  auto join = [](const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ";" : "") + items[i];
    return s;
  };
  out << "[outcome]\nlabels = " << join(schema.category_labels()) << "\n";
  for (const auto& cov : schema.covariates()) {
    out << "\n[covariate." << cov.name << "]\n";
    out << "kind = " << (cov.kind == CovariateKind::binary ? "binary" : "categorical") << "\n";
    out << "levels = " << join(cov.levels) << "\n";
    if (!cov.levels.empty()) out << "reference = " << cov.levels[cov.reference] << "\n";
    out << "role = " << role_name(cov.role) << "\n";
  }
}

}  // namespace regmse
