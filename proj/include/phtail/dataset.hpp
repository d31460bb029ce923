// Tables of nonnegative reals with named columns, stored as CSV (header row,
// comma separators, LF endings, 17-significant-digit numbers so values round
// trip exactly).
#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace phtail {

struct Dataset {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // n x D
  // Where the numbers came from: generator spec and seed, or a file path.
  std::string provenance;
};

// Zero-row tables are allowed on output (header-only file).
void save_csv(const Dataset& d, const std::string& path);

// Rejects missing bodies, ragged rows and negative or non-numeric cells with
// the offending row and column named. Provenance is set to the path.
Dataset load_csv(const std::string& path);

// Elementwise ln(1 + x); input must be nonnegative and finite.
Eigen::MatrixXd log1p_columns(const Eigen::MatrixXd& values);

}  // namespace phtail
