#include "csv.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace npmix::io {

namespace {

std::vector<double> parse_row(const std::string& line, const std::string& path, long lineno) {
  std::vector<double> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const char* begin = field.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0' && *end != '\r')) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": non-numeric field '" + field + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

Matrix read_csv_matrix(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  bool skipped_header = !has_header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    rows.push_back(parse_row(line, path, lineno));
    if (rows.size() > 1 && rows.back().size() != rows.front().size()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": inconsistent number of columns");
    }
  }
  if (rows.empty()) throw std::invalid_argument(path + ": no data rows");

  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void write_csv_matrix(const std::string& path, const Matrix& m, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out.precision(17);
  if (!header.empty()) out << header << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << m(i, j);
    }
    out << "\n";
  }
}

}  // namespace npmix::io
