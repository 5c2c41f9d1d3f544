#include "cropemu/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "cropemu/error.hpp"

namespace cropemu::csv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("missing column '" + std::string(name) + "'");
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

double Table::number(std::size_t row, std::size_t col) const {
  return parse_double(rows[row][col], "line " + std::to_string(line_numbers[row]) + ", column '" +
                                          header[col] + "'");
}

long Table::integer(std::size_t row, std::size_t col) const {
  const std::string& text = rows[row][col];
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("line " + std::to_string(line_numbers[row]) + ", column '" + header[col] +
                     "': expected an integer, got '" + text + "'");
  }
  return v;
}

double parse_double(std::string_view text, const std::string& context) {
  text = trim(text);
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    if (text == "nan" || text == "NaN") return std::nan("");
    throw ParseError(context + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

Table read(std::istream& in, const std::string& source_name) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = split(view);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError(source_name + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw ParseError(source_name + ": no header line");
  return t;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read(in, path.string());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

Writer& Writer::field(std::string_view text) {
  if (!first_) out_ << ',';
  out_ << text;
  first_ = false;
  return *this;
}

Writer& Writer::field(double v) { return field(std::string_view(format_double(v))); }
Writer& Writer::field(long v) { return field(std::string_view(std::to_string(v))); }
Writer& Writer::field(std::size_t v) { return field(std::string_view(std::to_string(v))); }

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

}  // namespace cropemu::csv
