#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "dust/common.hpp"
#include "dust/stat_store.hpp"

namespace dust {

struct CsvError : Error {
  std::size_t line = 0;
  std::size_t col = 0;
  CsvError(const std::string& msg, std::size_t line_, std::size_t col_)
      : Error(msg + " (line " + std::to_string(line_) + ", column " +
              std::to_string(col_) + ")"),
        line(line_),
        col(col_) {}
};

namespace detail {

inline bool blank_line(const std::string& s) {
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

}  // namespace detail

// Rows are time points, columns are series components. '.' decimal point,
// ',' separator, blank lines skipped, non-finite values rejected.
inline Series read_csv(std::istream& in, bool skip_header = false) {
  Series out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t expected = 0;
  bool header_pending = skip_header;
  while (std::getline(in, line)) {
    ++lineno;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    if (detail::blank_line(line)) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t col = 0;
    std::size_t pos = 0;
    while (true) {
      ++col;
      const std::size_t comma = line.find(',', pos);
      std::string field = line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      // trim surrounding spaces
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      if (b == std::string::npos) {
        throw CsvError("empty field", lineno, col);
      }
      field = field.substr(b, e - b + 1);
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end != field.c_str() + field.size()) {
        throw CsvError("malformed number '" + field + "'", lineno, col);
      }
      if (!std::isfinite(v)) {
        throw CsvError("non-finite value '" + field + "'", lineno, col);
      }
      out.values.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (expected == 0) {
      expected = col;
    } else if (col != expected) {
      throw CsvError("expected " + std::to_string(expected) + " columns, got " +
                         std::to_string(col),
                     lineno, col);
    }
    ++out.n;
  }
  if (out.n == 0) throw CsvError("no data rows", lineno, 0);
  out.cols = expected;
  return out;
}

inline void write_csv(std::ostream& out, const Series& s,
                      bool header = false) {
  if (header) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      if (c) out << ',';
      out << 'c' << c;
    }
    out << '\n';
  }
  char buf[40];
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      if (c) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", s.at(i, c));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace dust
