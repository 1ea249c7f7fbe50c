#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rml::io {

struct CsvTable {
  std::vector<std::string> comments;  // written as "# <line>"
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::size_t column(const std::string& name) const;  // throws InputError if missing
  bool has_column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  std::string comment_value(const std::string& key) const;  // "key=value" comments
};

// Shortest decimal representation that round-trips.
std::string fmt(double x);
std::string fmt(long long x);
inline std::string fmt(std::size_t x) { return fmt(static_cast<long long>(x)); }
inline std::string fmt(int x) { return fmt(static_cast<long long>(x)); }

std::string to_string(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string read_file(const std::filesystem::path& path);

}  // namespace rml::io
