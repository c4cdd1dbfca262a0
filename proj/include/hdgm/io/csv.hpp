#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hdgm/errors.hpp"

namespace hdgm::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;            // -1 when absent
  int require_col(const std::string& name) const;    // throws InputError
};

CsvTable read_csv(const std::filesystem::path& path);

// Empty, "NA" and "NaN" fields parse to NaN; anything else must be numeric.
double parse_double_or_nan(const std::string& field, const std::string& what);
double parse_double(const std::string& field, const std::string& what);
long parse_long(const std::string& field, const std::string& what);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

// RFC-style quoting only when the field needs it.
std::string csv_escape(const std::string& field);

// Writes to <path>.tmp and renames into place, so partial outputs are never
// left behind.
void atomic_write(const std::filesystem::path& path, const std::string& content);

class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  void write(const std::filesystem::path& path) const;

 private:
  std::size_t width_;
  std::string buf_;
};

}  // namespace hdgm::io
