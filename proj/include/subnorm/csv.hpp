#ifndef SUBNORM_CSV_HPP
#define SUBNORM_CSV_HPP

// Minimal RFC 4180 writer: one header row, fields quoted only when needed,
// doubles rendered with 17 significant digits.

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "subnorm/tensor_io.hpp"

namespace subnorm {

class CsvRow {
 public:
  CsvRow& add(std::string_view field) {
    fields_.push_back(quote(field));
    return *this;
  }
  CsvRow& add(const char* field) { return add(std::string_view(field)); }
  CsvRow& add(const std::string& field) { return add(std::string_view(field)); }
  CsvRow& add(double v) {
    fields_.push_back(format_double(v));
    return *this;
  }
  CsvRow& add(std::int64_t v) {
    fields_.push_back(std::to_string(v));
    return *this;
  }
  CsvRow& add(int v) { return add(static_cast<std::int64_t>(v)); }
  CsvRow& add(std::uint64_t v) {
    fields_.push_back(std::to_string(v));
    return *this;
  }
  CsvRow& add(bool v) {
    fields_.emplace_back(v ? "1" : "0");
    return *this;
  }

  const std::vector<std::string>& fields() const { return fields_; }

  static std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

 private:
  std::vector<std::string> fields_;
};

inline void write_csv_line(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  out << "\r\n";
}

inline void write_csv_header(std::ostream& out, const std::vector<std::string>& header) {
  std::vector<std::string> quoted;
  for (const auto& h : header) quoted.push_back(CsvRow::quote(h));
  write_csv_line(out, quoted);
}

}  // namespace subnorm

#endif  // SUBNORM_CSV_HPP
