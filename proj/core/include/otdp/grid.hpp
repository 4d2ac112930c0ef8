#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "otdp/problem.hpp"

namespace otdp {

using Index = Eigen::Index;

/// Equidistant tensor grid over a box. Nodes are enumerated row-major
/// (last axis fastest). Weights are tensor trapezoid weights, which are also
/// the volumes of the dual finite-volume cells.
class Grid {
 public:
  Grid() = default;
  Grid(Box omega, std::vector<int> counts);

  int dim() const noexcept { return static_cast<int>(counts_.size()); }
  Index size() const noexcept { return size_; }
  const Box& box() const noexcept { return box_; }
  const std::vector<int>& counts() const noexcept { return counts_; }
  int count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
  Index stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }
  double volume() const;

  double coord(Index node, int axis) const;
  void node(Index i, std::span<double> x) const;
  std::vector<double> node(Index i) const;
  const Eigen::VectorXd& weights() const noexcept { return weights_; }

  std::vector<int> multi_index(Index flat) const;
  Index flat_index(std::span<const int> multi) const;
  /// Position of `node` along `axis`.
  int axis_index(Index node, int axis) const;

  Index nearest_node(std::span<const double> x) const;
  Index center_node() const;

  /// Multilinear interpolation of a nodal field. Points within 1e-12 (relative
  /// to the axis span) outside the box are clamped; beyond that OutOfDomain.
  double interpolate(std::span<const double> field, std::span<const double> x) const;
  /// Interpolates `ncols` interleaved fields (node-major, `field[i*ncols+c]`).
  void interpolate(std::span<const double> field, int ncols, std::span<const double> x,
                   std::span<double> out) const;

  bool same_layout(const Grid& other, double rel_tol = 1e-12) const;

 private:
  void locate(std::span<const double> x, std::span<Index> base, std::span<double> frac) const;

  Box box_;
  std::vector<int> counts_;
  std::vector<double> spacing_;
  std::vector<Index> strides_;
  Index size_ = 0;
  Eigen::VectorXd weights_;
};

Grid build_grid(const Box& omega, const std::vector<int>& counts);

}  // namespace otdp
