#include "otdp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "otdp/error.hpp"

namespace otdp {

Grid::Grid(Box omega, std::vector<int> counts) : box_(std::move(omega)), counts_(std::move(counts)) {
  if (box_.empty() || box_.size() != counts_.size())
    throw InvalidGrid("grid needs one node count per domain axis");
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    if (counts_[a] < 3)
      throw InvalidGrid("axis " + std::to_string(a + 1) + " has " + std::to_string(counts_[a]) +
                        " nodes; at least 3 are required");
    if (!(box_[a].lo < box_[a].hi)) throw InvalidGrid("empty domain interval");
  }
  const std::size_t n = counts_.size();
  spacing_.resize(n);
  strides_.resize(n);
  size_ = 1;
  for (std::size_t a = n; a-- > 0;) {
    strides_[a] = size_;
    size_ *= counts_[a];
    spacing_[a] = box_[a].width() / (counts_[a] - 1);
  }
  weights_.resize(size_);
  for (Index i = 0; i < size_; ++i) {
    double w = 1.0;
    for (std::size_t a = 0; a < n; ++a) {
      int k = axis_index(i, static_cast<int>(a));
      w *= (k == 0 || k == counts_[a] - 1) ? 0.5 * spacing_[a] : spacing_[a];
    }
    weights_[i] = w;
  }
}

double Grid::volume() const {
  double v = 1.0;
  for (const auto& iv : box_) v *= iv.width();
  return v;
}

int Grid::axis_index(Index node, int axis) const {
  return static_cast<int>((node / strides_[static_cast<std::size_t>(axis)]) % counts_[static_cast<std::size_t>(axis)]);
}

double Grid::coord(Index node, int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  int k = axis_index(node, axis);
  return k == counts_[a] - 1 ? box_[a].hi : box_[a].lo + k * spacing_[a];
}

void Grid::node(Index i, std::span<double> x) const {
  for (int a = 0; a < dim(); ++a) x[static_cast<std::size_t>(a)] = coord(i, a);
}

std::vector<double> Grid::node(Index i) const {
  std::vector<double> x(counts_.size());
  node(i, x);
  return x;
}

std::vector<int> Grid::multi_index(Index flat) const {
  std::vector<int> m(counts_.size());
  for (int a = 0; a < dim(); ++a) m[static_cast<std::size_t>(a)] = axis_index(flat, a);
  return m;
}

Index Grid::flat_index(std::span<const int> multi) const {
  Index i = 0;
  for (std::size_t a = 0; a < counts_.size(); ++a) i += multi[a] * strides_[a];
  return i;
}

Index Grid::nearest_node(std::span<const double> x) const {
  Index i = 0;
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    double t = std::round((x[a] - box_[a].lo) / spacing_[a]);
    int k = static_cast<int>(std::clamp(t, 0.0, static_cast<double>(counts_[a] - 1)));
    i += k * strides_[a];
  }
  return i;
}

Index Grid::center_node() const {
  std::vector<double> c(counts_.size());
  for (std::size_t a = 0; a < c.size(); ++a) c[a] = 0.5 * (box_[a].lo + box_[a].hi);
  return nearest_node(c);
}

void Grid::locate(std::span<const double> x, std::span<Index> base, std::span<double> frac) const {
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    const double tol = 1e-12 * box_[a].width();
    double v = x[a];
    if (!(v >= box_[a].lo - tol && v <= box_[a].hi + tol))
      throw OutOfDomain("point component " + std::to_string(a + 1) + " = " + std::to_string(v) +
                        " lies outside the domain");
    v = std::clamp(v, box_[a].lo, box_[a].hi);
    double t = (v - box_[a].lo) / spacing_[a];
    auto k = static_cast<Index>(std::floor(t));
    k = std::clamp<Index>(k, 0, counts_[a] - 2);
    base[a] = k;
    frac[a] = std::clamp(t - static_cast<double>(k), 0.0, 1.0);
  }
}

double Grid::interpolate(std::span<const double> field, std::span<const double> x) const {
  double out = 0.0;
  interpolate(field, 1, x, std::span<double>(&out, 1));
  return out;
}

void Grid::interpolate(std::span<const double> field, int ncols, std::span<const double> x,
                       std::span<double> out) const {
  const std::size_t n = counts_.size();
  Index base[8];
  double frac[8];
  std::vector<Index> base_v;
  std::vector<double> frac_v;
  std::span<Index> bs(base, n);
  std::span<double> fs(frac, n);
  if (n > 8) {
    base_v.resize(n);
    frac_v.resize(n);
    bs = base_v;
    fs = frac_v;
  }
  locate(x, bs, fs);
  for (int c = 0; c < ncols; ++c) out[static_cast<std::size_t>(c)] = 0.0;
  const unsigned corners = 1u << n;
  for (unsigned mask = 0; mask < corners; ++mask) {
    double w = 1.0;
    Index idx = 0;
    for (std::size_t a = 0; a < n; ++a) {
      bool up = (mask >> a) & 1u;
      w *= up ? fs[a] : 1.0 - fs[a];
      idx += (bs[a] + (up ? 1 : 0)) * strides_[a];
    }
    if (w == 0.0) continue;
    for (int c = 0; c < ncols; ++c)
      out[static_cast<std::size_t>(c)] += w * field[static_cast<std::size_t>(idx * ncols + c)];
  }
}

bool Grid::same_layout(const Grid& other, double rel_tol) const {
  if (counts_ != other.counts_) return false;
  for (std::size_t a = 0; a < box_.size(); ++a) {
    double tol = rel_tol * std::max(1.0, box_[a].width());
    if (std::abs(box_[a].lo - other.box_[a].lo) > tol || std::abs(box_[a].hi - other.box_[a].hi) > tol)
      return false;
  }
  return true;
}

Grid build_grid(const Box& omega, const std::vector<int>& counts) { return Grid(omega, counts); }

}  // namespace otdp
