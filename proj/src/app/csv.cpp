#include "app/csv.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "eprlock/errors.hpp"

namespace eprlock::csv {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

std::string format(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value, std::chars_format::general, 17);
  return std::string(buffer, result.ptr);
}

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), path_(path), columns_(header.size()) {
  if (!out_) throw InvalidInput("cannot write " + path.string());
  for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
  out_ << '\n';
}

void Writer::row(std::initializer_list<double> values) { row(std::vector<double>(values)); }

void Writer::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw InvalidInput("csv row width differs from header in " + path_.string());
  line_.clear();
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) line_ += ',';
    line_ += format(values[k]);
  }
  line_ += '\n';
  out_ << line_;
}

void Writer::close() {
  out_.close();
  if (!out_) throw InvalidInput("failed writing " + path_.string());
}

int Table::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return static_cast<int>(k);
  }
  return -1;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  Table table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InvalidInput(path.string() + ":" + std::to_string(number) + ": expected " +
                         std::to_string(table.header.size()) + " cells");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) {
      if (cell.empty()) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      double value = 0;
      const auto result = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (result.ec != std::errc() || result.ptr != cell.data() + cell.size()) {
        throw InvalidInput(path.string() + ":" + std::to_string(number) + ": not a number: " + cell);
      }
      row.push_back(value);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw InvalidInput(path.string() + ": empty file");
  return table;
}

}  // namespace eprlock::csv
