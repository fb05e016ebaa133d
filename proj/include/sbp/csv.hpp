#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace sbp::csv {

/// Shortest decimal text that parses back to the same double.
std::string format(double value);

std::vector<std::string> split_line(std::string_view line, char sep = ',');

/// Parses a full double; nullopt-style failure reported through `ok`.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

std::string_view trim(std::string_view s);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// Reads comma-separated rows, skipping blank lines. The first non-blank
/// line becomes the header when `has_header`.
Table read(std::istream& in, bool has_header = true);
Table read_file(const std::string& path, bool has_header = true);

}  // namespace sbp::csv
