#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace simcal {

/// RFC 4180 field quoting: fields containing a comma, quote, CR or LF are wrapped in
/// quotes with embedded quotes doubled.
std::string csv_escape(std::string_view field);

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double x);

/// Streams a CSV table with a single header line and CRLF-free '\n' row endings.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::vector<std::string> cells;
    cells.reserve(sizeof...(fields));
    (cells.push_back(to_cell(fields)), ...);
    write_cells(cells);
  }

  void write_cells(const std::vector<std::string>& cells);
  std::size_t columns() const { return columns_; }

 private:
  static std::string to_cell(const std::string& s) { return s; }
  static std::string to_cell(const char* s) { return s; }
  static std::string to_cell(std::string_view s) { return std::string(s); }
  template <typename T>
  static std::string to_cell(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
      return v ? "1" : "0";
    } else if constexpr (std::is_integral_v<T>) {
      return std::to_string(v);
    } else {
      return format_number(static_cast<double>(v));
    }
  }

  std::ostream& out_;
  std::size_t columns_;
};

/// Reads a CSV document (RFC 4180) into rows of fields; the header is row 0.
std::vector<std::vector<std::string>> read_csv(std::string_view text);

}  // namespace simcal
