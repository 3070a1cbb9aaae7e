#pragma once

#include <string>
#include <vector>

namespace matfdr::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a comma-separated file with a header row. Quoting is not supported;
/// none of the artifact's writers emit values that would need it.
Table read(const std::string& path);

void write(const std::string& path, const Table& table);

/// Shortest decimal representation that round-trips a double.
std::string format(double value);

}  // namespace matfdr::csv
