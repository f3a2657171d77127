#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace regmse::csv {

/// One parsed CSV table. Cells are kept as strings; `line_numbers[r]` is the
/// 1-based physical line the data row came from (the header is line 1).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  /// Index of a header column or -1.
  [[nodiscard]] int column(std::string_view name) const;
};

/// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(std::string_view line);

/// Reads a comma-separated table with a header row. Blank lines are skipped.
/// Every data row must have as many fields as the header; the error names the
/// offending line.
Table read(std::istream& in, const std::string& source_name);
Table read_file(const std::string& path);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Writes a header and rows; every line is terminated with '\n'.
void write(std::ostream& out, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);

/// Shortest round-trip decimal representation, independent of the C locale.
std::string format_double(double value);

/// Parses a decimal using '.' as separator regardless of locale.
/// Throws InputError mentioning `context` on failure.
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

}  // namespace regmse::csv
