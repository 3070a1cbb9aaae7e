#include "matfdr/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace matfdr::csv {

namespace {
std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}
}  // namespace

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size())
      throw std::runtime_error("csv: field count mismatch at " + path + ":" +
                               std::to_string(line_no));
    table.rows.push_back(std::move(fields));
  }
  return table;
}

void write(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw std::runtime_error("csv: row width mismatch writing " + path);
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("csv: write failed for " + path);
}

std::string format(double value) {
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    double parsed = 0.0;
    std::sscanf(buf, "%lf", &parsed);
    if (parsed == value) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace matfdr::csv
