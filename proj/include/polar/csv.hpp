#pragma once
// Minimal RFC 4180 reader/writer: comma separated, double-quote quoting,
// quoted fields may contain commas, quotes ("") and newlines.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polar/common.hpp"

namespace polar::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

// Parses the whole text. A field is unquoted unless it starts with '"'.
// Rows with an unterminated quote are reported via `bad_rows` and dropped.
inline Table parse(std::string_view text, std::size_t* bad_rows = nullptr) {
  Table out;
  std::vector<Row> rows;
  std::vector<std::size_t> lines;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) {
      rows.push_back(std::move(row));
      lines.push_back(row_line);
    }
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      end_row();
      ++line;
      row_line = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) {
    if (bad_rows) ++*bad_rows;
  } else if (field_started || !row.empty()) {
    end_row();
  }
  if (!rows.empty()) {
    out.header = std::move(rows.front());
    out.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
    out.line_numbers.assign(lines.begin() + 1, lines.end());
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Load, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Table read(const std::string& path, std::size_t* bad_rows = nullptr) {
  return parse(read_file(path), bad_rows);
}

inline std::string quote(std::string_view field) {
  const bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

// Tab-separated fields are not quoted; embedded tabs and line breaks become spaces.
inline std::string tsv_field(std::string_view field) {
  std::string out(field);
  for (char& c : out)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return out;
}

inline void write_row(std::ostream& os, const Row& row, char sep = ',') {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << sep;
    os << (sep == ',' ? quote(row[i]) : tsv_field(row[i]));
  }
  os << '\n';
}

// Shortest-roundtrip-safe text for a double; NaN rendered as "NaN".
inline std::string format_double(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s == "NaN" || s == "nan") return kNaN;
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) return std::nullopt;
  return v;
}

}  // namespace polar::csv
