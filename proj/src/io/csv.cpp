#include "hdgm/io/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <system_error>

namespace hdgm::io {

int CsvTable::col(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

int CsvTable::require_col(const std::string& name) const {
  const int j = col(name);
  if (j < 0) throw InputError("required column '" + name + "' is missing");
  return j;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw InputError("unterminated quote on line " + std::to_string(line_no));
  fields.push_back(cur);
  return fields;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (line_no == 1) {
      table.header = std::move(fields);
    } else {
      if (fields.size() != table.header.size())
        throw InputError("line " + std::to_string(line_no) + " of '" + path.string() + "' has " +
                         std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(table.header.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (table.header.empty()) throw InputError("'" + path.string() + "' has no header");
  return table;
}

double parse_double_or_nan(const std::string& field, const std::string& what) {
  if (field.empty() || field == "NA" || field == "NaN" || field == "nan")
    return std::nan("");
  return parse_double(field, what);
}

double parse_double(const std::string& field, const std::string& what) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw InputError("cannot parse '" + field + "' as a number (" + what + ")");
  return v;
}

long parse_long(const std::string& field, const std::string& what) {
  long v = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw InputError("cannot parse '" + field + "' as an integer (" + what + ")");
  return v;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "NaN";
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot rename '" + tmp.string() + "' to '" + path.string() + "'");
}

CsvBuilder::CsvBuilder(std::vector<std::string> header) : width_(header.size()) {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) buf_ += ',';
    buf_ += csv_escape(header[j]);
  }
  buf_ += '\n';
}

void CsvBuilder::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_)
    throw InputError("csv row width mismatch: " + std::to_string(fields.size()) + " vs " +
                     std::to_string(width_));
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (j) buf_ += ',';
    buf_ += csv_escape(fields[j]);
  }
  buf_ += '\n';
}

void CsvBuilder::write(const std::filesystem::path& path) const { atomic_write(path, buf_); }

}  // namespace hdgm::io
