#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace eprlock::csv {

/// 17 significant digits, '.' decimal separator regardless of locale.
std::string format(double value);

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(std::initializer_list<double> values);
  void row(const std::vector<double>& values);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_;
  std::string line_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // empty cells read as NaN

  /// Index of a named column, or -1.
  int column(const std::string& name) const;
};

/// Reads a header line plus numeric rows. Blank lines are skipped; any other
/// malformed cell throws InvalidInput naming the line.
Table read(const std::filesystem::path& path);

}  // namespace eprlock::csv
