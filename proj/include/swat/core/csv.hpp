#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/token_window.hpp"

// TokenWindow CSV: the header row lists the absolute positions of the
// columns (consecutive integers starting at the offset); each following row
// is one channel.
//
//   -2,-1,0,1,2
//   0.1,0.7,0.3,0.9,0.5

namespace swat {

inline void write_window_csv(std::ostream& os, const TokenWindow& x) {
  for (long c = 0; c < x.length(); ++c) os << (c ? "," : "") << x.offset() + c;
  os << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < x.dim(); ++r) {
    for (Eigen::Index c = 0; c < x.length(); ++c) os << (c ? "," : "") << x.data()(r, c);
    os << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace detail

inline TokenWindow read_window_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw UsageError("window csv: missing header row");
  const auto header = detail::split_csv_line(line);
  if (header.empty()) throw UsageError("window csv: empty header");
  std::vector<long> positions;
  try {
    for (const auto& h : header) positions.push_back(std::stol(h));
  } catch (const std::exception&) {
    throw UsageError("window csv: header must hold integer positions");
  }
  for (std::size_t c = 1; c < positions.size(); ++c)
    if (positions[c] != positions[c - 1] + 1) throw UsageError("window csv: header positions not consecutive");

  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    try {
      for (const auto& cell : detail::split_csv_line(line)) row.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw UsageError("window csv: non-numeric cell");
    }
    if (row.size() != positions.size()) throw UsageError("window csv: ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw UsageError("window csv: no channels");
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(positions.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < positions.size(); ++c)
      data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return TokenWindow(positions.front(), std::move(data));
}

inline TokenWindow read_window_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read " + path);
  return read_window_csv(is);
}

inline void write_window_csv_file(const std::string& path, const TokenWindow& x) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path);
  write_window_csv(os, x);
}

}  // namespace swat
