#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cropemu::csv {

// Minimal comma-separated reader for the project's own files: no quoting,
// '#' lines and blank lines skipped, first non-comment line is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  // Index of a named column; throws ParseError naming the column when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  double number(std::size_t row, std::size_t col) const;
  long integer(std::size_t row, std::size_t col) const;
};

Table read(std::istream& in, const std::string& source_name = "<stream>");
Table read_file(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view line, char sep = ',');

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Parses a full-field double; throws ParseError with the given context.
double parse_double(std::string_view text, const std::string& context);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  Writer& field(std::string_view text);
  Writer& field(double v);
  Writer& field(long v);
  Writer& field(std::size_t v);
  Writer& field(int v) { return field(static_cast<long>(v)); }
  void end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace cropemu::csv
