#include "phtail/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "phtail/jsonio.hpp"

namespace phtail {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string cell_name(const std::vector<std::string>& columns,
                      Eigen::Index row, Eigen::Index col) {
  return "data row " + std::to_string(row + 1) + ", column " +
         std::to_string(col + 1) + " (" +
         columns[static_cast<std::size_t>(col)] + ")";
}

}  // namespace

void save_csv(const Dataset& d, const std::string& path) {
  if (static_cast<Eigen::Index>(d.columns.size()) != d.values.cols()) {
    throw std::invalid_argument("save_csv: column name count mismatch");
  }
  if (d.columns.empty()) {
    throw std::invalid_argument("save_csv: table has no columns");
  }
  if (!d.values.allFinite() || (d.values.array() < 0.0).any()) {
    throw std::invalid_argument("save_csv: values must be finite and >= 0");
  }
  std::string out;
  for (std::size_t j = 0; j < d.columns.size(); ++j) {
    if (j > 0) out += ',';
    out += d.columns[j];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(d.values(i, j));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

Dataset load_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw std::invalid_argument("load_csv: " + path + ": missing header row");
  }
  Dataset d;
  d.columns = split_line(line);
  const Eigen::Index cols = static_cast<Eigen::Index>(d.columns.size());

  std::vector<double> cells;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> raw = split_line(line);
    if (static_cast<Eigen::Index>(raw.size()) != cols) {
      throw std::invalid_argument(
          "load_csv: data row " + std::to_string(rows + 1) + " has " +
          std::to_string(raw.size()) + " cells, expected " +
          std::to_string(cols));
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::string& cell = raw[static_cast<std::size_t>(j)];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw std::invalid_argument("load_csv: " + cell_name(d.columns, rows, j) +
                                    ": not a number: '" + cell + "'");
      }
      if (!std::isfinite(v)) {
        throw std::invalid_argument("load_csv: " + cell_name(d.columns, rows, j) +
                                    ": non-finite value");
      }
      if (v < 0.0) {
        throw std::invalid_argument("load_csv: " + cell_name(d.columns, rows, j) +
                                    ": negative value");
      }
      cells.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) {
    throw std::invalid_argument("load_csv: " + path + ": no data rows");
  }
  d.values.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      d.values(i, j) = cells[static_cast<std::size_t>(i * cols + j)];
    }
  }
  d.provenance = path;
  return d;
}

Eigen::MatrixXd log1p_columns(const Eigen::MatrixXd& values) {
  if (!values.allFinite() || (values.array() < 0.0).any()) {
    throw std::invalid_argument(
        "log1p_columns: values must be finite and >= 0");
  }
  return values.unaryExpr([](double v) { return std::log1p(v); });
}

}  // namespace phtail
