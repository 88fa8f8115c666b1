#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mirror {

// Comma-separated table with a header row. Cells are kept as text;
// quoting is not supported (none of the datasets need it).
class DataTable {
 public:
  DataTable() = default;
  explicit DataTable(std::vector<std::string> header);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return cells_.size(); }
  std::size_t cols() const { return header_.size(); }

  bool has_column(std::string_view name) const;
  // Throws SchemaError if the column is missing.
  std::size_t column(std::string_view name) const;

  const std::string& cell(std::size_t row, std::size_t col) const { return cells_[row][col]; }
  // Parses the cell as a real number; throws SchemaError on malformed input.
  double number(std::size_t row, std::size_t col) const;

  void add_row(std::vector<std::string> row);

  static DataTable read_csv(std::istream& in);
  static DataTable read_csv_file(const std::string& path);
  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
};

// Shortest round-trippable decimal form of a double.
std::string format_number(double value);

}  // namespace mirror
