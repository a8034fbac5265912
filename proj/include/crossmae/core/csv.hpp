#pragma once

#include <string>
#include <vector>

namespace crossmae::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;  // -1 if absent
  int require_col(const std::string& name) const;
};

std::string escape(const std::string& field);
std::string join_row(const std::vector<std::string>& fields);

Table read_file(const std::string& path);
void write_file(const std::string& path, const Table& t);

}  // namespace crossmae::csv
