#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "regmse/register.hpp"

namespace regmse {

/// Reads a schema in INI form:
///
///     [outcome]
///     labels = Illiterate;Literate;...
///
///     [covariate.age]
///     kind = categorical          ; or binary
///     levels = (,28];[29,39];...  ; ';'-separated, in declared order
///     reference = (,28]           ; optional, defaults to the first level
///     role = predictor            ; predictor | external_domain | identifier
///
/// Sections are processed in file order, which fixes the design column order.
CovariateSchema read_schema(std::istream& in, const std::string& source_name);
CovariateSchema read_schema_file(const std::string& path);
void write_schema(std::ostream& out, const CovariateSchema& schema);

/// Splits on ';' and trims surrounding blanks.
std::vector<std::string> split_list(std::string_view text, char separator = ';');

}  // namespace regmse
