#ifndef NPMIX_CSV_HPP
#define NPMIX_CSV_HPP

#include <string>

#include "types.hpp"

namespace npmix::io {

/// Comma-separated numeric matrix, one observation per row. A header row is
/// skipped when has_header is set. Throws std::invalid_argument on ragged
/// rows, non-numeric fields or an empty file.
Matrix read_csv_matrix(const std::string& path, bool has_header);

void write_csv_matrix(const std::string& path, const Matrix& m,
                      const std::string& header = "");

}  // namespace npmix::io

#endif
