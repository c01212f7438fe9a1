#pragma once

// Columnar CSV output. Numbers are written with 17 significant digits so a
// write/read cycle reproduces every double exactly.

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rpde/rough_core.hpp"

namespace rpde {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv_row(std::ostream& os, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    os << format_double(row[i]);
  }
  os << '\n';
}

inline void write_csv_header(std::ostream& os, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) os << ',';
    os << names[i];
  }
  os << '\n';
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// Reads a numeric CSV with one header line.
inline std::vector<std::vector<double>> read_csv_rows(std::istream& is, std::vector<std::string>* header = nullptr) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("csv: missing header");
  if (header) *header = split(line, ',');
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidArgument("csv: non-numeric cell '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Columns: t, X1..Xd, XX11..XXdd. Row i carries the block over
/// [t_{i-1}, t_i]; row 0 carries zeros.
inline void write_rough_path_csv(std::ostream& os, const RoughPath& rp) {
  const std::size_t d = rp.dim();
  std::vector<std::string> names{"t"};
  for (std::size_t j = 0; j < d; ++j) names.push_back("X" + std::to_string(j + 1));
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t l = 0; l < d; ++l) names.push_back("XX" + std::to_string(j + 1) + "_" + std::to_string(l + 1));
  write_csv_header(os, names);
  std::vector<double> row(1 + d + d * d);
  for (std::size_t i = 0; i <= rp.steps(); ++i) {
    row[0] = rp.time(i);
    for (std::size_t j = 0; j < d; ++j) row[1 + j] = rp.base()[i](static_cast<Eigen::Index>(j));
    for (std::size_t q = 0; q < d * d; ++q)
      row[1 + d + q] = i == 0 ? 0.0 : rp.blocks()(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i - 1));
    write_csv_row(os, row);
  }
}

inline RoughPath read_rough_path_csv(std::istream& is, double gamma) {
  const auto rows = read_csv_rows(is);
  require(rows.size() >= 2, "read_rough_path_csv: need at least two rows");
  const std::size_t width = rows.front().size();
  std::size_t d = 0;
  while (1 + d + d * d < width) ++d;
  require(d > 0 && 1 + d + d * d == width, "read_rough_path_csv: column count is not 1 + d + d^2");
  const std::size_t n = rows.size() - 1;
  Matrix vals(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n + 1));
  Matrix blocks(static_cast<Eigen::Index>(d * d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i <= n; ++i) {
    require(rows[i].size() == width, "read_rough_path_csv: ragged row");
    for (std::size_t j = 0; j < d; ++j) vals(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][1 + j];
    if (i > 0)
      for (std::size_t q = 0; q < d * d; ++q)
        blocks(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i - 1)) = rows[i][1 + d + q];
  }
  return RoughPath(GridPath(rows.back()[0], std::move(vals)), std::move(blocks), gamma);
}

}  // namespace rpde
