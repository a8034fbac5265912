#include "crossmae/core/csv.hpp"

#include <fstream>
#include <sstream>

#include "crossmae/core/errors.hpp"

namespace crossmae::csv {

int Table::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int Table::require_col(const std::string& name) const {
  const int i = col(name);
  if (i < 0) throw InputError("csv: missing column '" + name + "'");
  return i;
}

std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out += ch;
  }
  out += "\"";
  return out;
}

std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

namespace {

std::vector<std::string> parse_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Table read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("csv: cannot open " + path);
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto fields = parse_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size())
        throw InputError("csv: ragged row in " + path);
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw InputError("csv: empty file " + path);
  return t;
}

void write_file(const std::string& path, const Table& t) {
  std::ofstream os(path);
  if (!os) throw InputError("csv: cannot open " + path + " for writing");
  os << join_row(t.header) << "\n";
  for (const auto& r : t.rows) os << join_row(r) << "\n";
  if (!os) throw InputError("csv: write failed for " + path);
}

}  // namespace crossmae::csv
