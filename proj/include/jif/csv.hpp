#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace jif {

// Comma-separated text with a header row. Double-quoted fields may contain
// commas, newlines and "" escapes. Blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // -1 when absent.
  int column(std::string_view name) const;
};

// Throws DataError when a row's field count differs from the header's.
CsvTable parse_csv(std::string_view text);

std::string csv_field(std::string_view value);

}  // namespace jif
