#pragma once

#include <string>
#include <vector>

namespace gplccm::csv {

// Minimal delimited-text table: a header row plus string cells. Quoting with
// double quotes is honored on input; fields are not otherwise trimmed.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, -1 when absent.
  int column_index(const std::string& name) const;
};

Table read_string(const std::string& text, char delimiter = ',');
Table read_file(const std::string& path, char delimiter = ',');
void write_file(const std::string& path, const Table& table, char delimiter = ',');

}  // namespace gplccm::csv
