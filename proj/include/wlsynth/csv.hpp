#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wlsynth::csv {

/// A parsed CSV document: header plus rows of raw fields. Supports RFC 4180
/// double-quoted fields so SQL text can live in a column.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  /// Index of `name`, or a schema error naming the column.
  std::size_t require_column(std::string_view name) const;
};

Table read_file(const std::filesystem::path& path);
Table parse(std::string_view text);

/// Numeric field parsers. `row` is 1-based over data rows; errors carry
/// row and column.
double parse_double(std::string_view field, std::size_t row, std::string_view column);
std::int64_t parse_int(std::string_view field, std::size_t row, std::string_view column);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Writes `contents` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view contents);

}  // namespace wlsynth::csv
