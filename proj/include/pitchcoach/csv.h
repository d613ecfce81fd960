#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pitchcoach {

/// One CSV record and its 1-based line number in the source.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

/// Minimal comma-separated reader: no quoting, cells trimmed, blank lines
/// skipped, CRLF tolerated.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Whole-cell decimal parse; nullopt on blank or trailing garbage.
std::optional<double> parse_number(std::string_view cell);

}  // namespace pitchcoach
