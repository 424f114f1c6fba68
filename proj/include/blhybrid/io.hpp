#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blhybrid::io {

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view text);

std::string_view trim(std::string_view s) noexcept;

std::string to_lower(std::string_view s);

/// Splits one CSV line on commas. Quoted fields are not supported; market
/// data files here never need them.
std::vector<std::string_view> split_fields(std::string_view line);

/// Splits text into lines, dropping a trailing '\r' from each.
std::vector<std::string_view> split_lines(std::string_view text);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temp file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Numeric CSV with a header row; every column must parse as a double.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

NumericTable read_numeric_csv(const std::filesystem::path& path);
std::string format_numeric_csv(const std::vector<std::string>& header,
                               const std::vector<std::vector<double>>& columns);

}  // namespace blhybrid::io
