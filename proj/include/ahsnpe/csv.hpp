#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ahsnpe/core.hpp"

namespace ahsnpe {

struct Table {
  std::vector<std::string> header;
  Matrix values;
};

/// Formats a double with 17 significant digits, so parsing restores it exactly.
std::string format_double(double v);

/// Writes a header line and one comma-separated row per matrix row.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values);

/// Reads a file produced by write_csv (header required, all cells numeric).
Table read_csv(const std::filesystem::path& path);

std::vector<double> parse_double_list(const std::string& text);

}  // namespace ahsnpe
