#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "otdp/grid.hpp"

namespace otdp {

/// Nodal fields on a grid, stored as CSV: `#`-prefixed header lines
/// describing the grid, then one row per node with the coordinates followed
/// by the field columns.
///
///   # otdp grid field
///   # name: mu_inf
///   # lower: -3,-3
///   # upper: 3,3
///   # counts: 150,150
///   # columns: x1,x2,u1
///   -3,-3,0.25
struct GridFieldFile {
  std::string name;
  Box box;
  std::vector<int> counts;
  std::vector<std::string> columns;  // field columns only
  Eigen::MatrixXd values;            // nodes x columns

  Grid grid() const { return Grid(box, counts); }
};

void write_grid_field(const std::filesystem::path& path, const std::string& name, const Grid& g,
                      const std::vector<std::string>& columns, const Eigen::MatrixXd& values);

/// Throws Error on malformed files (row count or coordinates inconsistent
/// with the header).
GridFieldFile read_grid_field(const std::filesystem::path& path);

}  // namespace otdp
