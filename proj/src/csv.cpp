#include "rml/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

#include "rml/error.hpp"

namespace rml::io {

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size())
    throw InputError("experiments-cli/csv", "row has " + std::to_string(row.size()) + " fields, expected " +
                                                std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return k;
  throw InputError("experiments-cli/csv", "missing column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& s = rows.at(row).at(column(name));
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw InputError("experiments-cli/csv", "column '" + name + "' row " + std::to_string(row) +
                                                ": not a number: '" + s + "'");
  }
  return v;
}

std::string CsvTable::comment_value(const std::string& key) const {
  const std::string prefix = key + "=";
  for (const auto& c : comments)
    if (c.rfind(prefix, 0) == 0) return c.substr(prefix.size());
  return {};
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

std::string fmt(long long x) { return std::to_string(x); }

std::string to_string(const CsvTable& table) {
  std::ostringstream os;
  for (const auto& c : table.comments) os << "# " << c << "\n";
  for (std::size_t k = 0; k < table.columns.size(); ++k) os << (k ? "," : "") << table.columns[k];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
    os << "\n";
  }
  return os.str();
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  bool header = false;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ls(s);
    while (std::getline(ls, cur, ',')) out.push_back(cur);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string c = line.substr(1);
      if (!c.empty() && c[0] == ' ') c.erase(0, 1);
      t.comments.push_back(c);
      continue;
    }
    if (!header) {
      t.columns = split(line);
      header = true;
      continue;
    }
    t.add_row(split(line));
  }
  if (!header) throw InputError("experiments-cli/csv", "no header row");
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("experiments-cli/io", "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("experiments-cli/io", "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("experiments-cli/io", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_atomic(path, to_string(table)); }

}  // namespace rml::io
