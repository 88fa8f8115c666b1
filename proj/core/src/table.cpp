#include "mirror/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mirror/errors.hpp"

namespace mirror {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

}  // namespace

DataTable::DataTable(std::vector<std::string> header) : header_(std::move(header)) {}

bool DataTable::has_column(std::string_view name) const {
  for (const auto& h : header_) {
    if (h == name) return true;
  }
  return false;
}

std::size_t DataTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw SchemaError("missing column '" + std::string(name) + "'");
}

double DataTable::number(std::size_t row, std::size_t col) const {
  const std::string& s = cells_.at(row).at(col);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw SchemaError("row " + std::to_string(row + 1) + ", column '" + header_.at(col) +
                      "': not a number: '" + s + "'");
  }
  return v;
}

void DataTable::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) {
    throw SchemaError("row has " + std::to_string(row.size()) + " cells, header has " +
                      std::to_string(header_.size()));
  }
  cells_.push_back(std::move(row));
}

DataTable DataTable::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV input");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // BOM
  DataTable t(split(line));
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    t.add_row(split(line));
  }
  return t;
}

DataTable DataTable::read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return read_csv(in);
}

void DataTable::write_csv(std::ostream& out) const {
  auto write_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  write_row(header_);
  for (const auto& r : cells_) write_row(r);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace mirror
