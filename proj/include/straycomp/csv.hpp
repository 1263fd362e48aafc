#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "straycomp/core.hpp"

namespace straycomp {

/// Malformed CSV input; the message names the file, row and column.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain comma-separated table: one header line, no quoting.
struct CsvTable {
  std::string source = "<csv>";
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    throw CsvError(source + ": missing column '" + std::string(name) + "'");
  }
  bool has_column(std::string_view name) const {
    for (const auto& h : header) {
      if (h == name) return true;
    }
    return false;
  }

  /// Row indices are 0-based over data rows; messages count lines from 1 with
  /// the header as line 1.
  double number(std::size_t row, std::size_t col) const {
    const std::string& s = rows.at(row).at(col);
    double v = 0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != end) {
      throw CsvError(source + ": line " + std::to_string(row + 2) + ", column " + std::to_string(col + 1) + " ('" +
                     header[col] + "'): expected a number, got '" + s + "'");
    }
    return v;
  }
  double number(std::size_t row, std::string_view name) const { return number(row, column(name)); }

  std::string to_string() const {
    std::string out;
    append_line(out, header);
    for (const auto& r : rows) append_line(out, r);
    return out;
  }

  static void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += ',';
      out += cells[c];
    }
    out += '\n';
  }
};

inline CsvTable parse_csv(std::string_view text, std::string source = "<csv>") {
  CsvTable t;
  t.source = std::move(source);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw CsvError(t.source + ": line " + std::to_string(line_no) + ": expected " +
                     std::to_string(t.header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw CsvError(t.source + ": empty file, no header");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.filename().string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace straycomp
