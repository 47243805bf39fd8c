#include "gplccm/csv.hpp"

#include <fstream>
#include <sstream>

#include "gplccm/errors.hpp"

namespace gplccm::csv {

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

}  // namespace

int Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Table read_string(const std::string& text, char delimiter) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line, delimiter);
    if (t.columns.empty()) {
      t.columns = std::move(cells);
      continue;
    }
    if (cells.size() != t.columns.size()) {
      std::ostringstream os;
      os << "line " << line_no << " has " << cells.size() << " fields, header has "
         << t.columns.size();
      throw ParseError(os.str());
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.columns.empty()) throw SchemaError("input has no header row");
  return t;
}

Table read_file(const std::string& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return read_string(buf.str(), delimiter);
  } catch (const Error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const Table& table, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open file for writing: " + path);
  auto write_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << delimiter;
      bool needs_quotes = cells[i].find_first_of({delimiter, '"', '\n'}) != std::string::npos;
      if (needs_quotes) {
        out << '"';
        for (char c : cells[i]) {
          if (c == '"') out << '"';
          out << c;
        }
        out << '"';
      } else {
        out << cells[i];
      }
    }
    out << "\n";
  };
  write_row(table.columns);
  for (const auto& row : table.rows) write_row(row);
}

}  // namespace gplccm::csv
