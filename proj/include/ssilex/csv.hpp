#pragma once

// Minimal RFC 4180 style CSV reading and writing. Fields containing a comma,
// quote or newline are quoted on output; quoted fields are unescaped on input.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ssilex/error.hpp"

namespace ssilex::csv {

using Row = std::vector<std::string>;

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline void append_row(std::string& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += escape(row[i]);
  }
  out += '\n';
}

inline std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s == "-0.00" || s == "-0.0000" || s == "-0") s.erase(0, 1);
  return s;
}

// Parses a whole document. Blank lines are skipped.
inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        row_has_content = false;
        break;
      default:
        field += ch;
        row_has_content = true;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A parsed table whose first row is a header; columns are looked up by name.
class Table {
 public:
  Table(std::string_view text, const std::string& source) : source_(source) {
    auto rows = parse(text);
    if (rows.empty()) throw DataError(source + ": missing header row");
    header_ = std::move(rows.front());
    rows.erase(rows.begin());
    rows_ = std::move(rows);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      if (rows_[i].size() != header_.size())
        throw DataError(source + ": row " + std::to_string(i + 2) + " has " +
                        std::to_string(rows_[i].size()) + " fields, expected " +
                        std::to_string(header_.size()));
    }
  }

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == name) return i;
    throw DataError(source_ + ": missing column '" + std::string(name) + "'");
  }
  bool has_column(std::string_view name) const {
    for (const auto& h : header_)
      if (h == name) return true;
    return false;
  }

  const Row& header() const { return header_; }
  const std::vector<Row>& rows() const { return rows_; }
  const std::string& source() const { return source_; }

  // 1-based line number of data row i, for diagnostics.
  std::size_t line_of(std::size_t i) const { return i + 2; }

 private:
  std::string source_;
  Row header_;
  std::vector<Row> rows_;
};

inline long long parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": not an integer: '" + s + "'");
  }
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + s + "'");
  }
}

inline bool parse_bool(const std::string& s, const std::string& where) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw DataError(where + ": expected true/false, got '" + s + "'");
}

}  // namespace ssilex::csv
