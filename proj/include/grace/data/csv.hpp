#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace grace::csv {

// One parsed data line. `line` is the 1-based line number in the source.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  // Column index by name, or -1.
  int column(std::string_view name) const;
  // Column index by name; throws LoadError naming `source` if absent.
  int require_column(std::string_view name, const std::string& source) const;
};

// Reads a comma-separated table. Lines starting with '#' and blank lines are
// skipped; the first remaining line is the header. Fields are trimmed.
Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

double parse_double(std::string_view text, const std::string& where);
long parse_long(std::string_view text, const std::string& where);

// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace grace::csv
