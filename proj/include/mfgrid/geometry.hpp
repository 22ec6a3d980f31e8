#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfgrid/types.hpp"

namespace mfgrid {

enum class GridKind { Regular, Irregular };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Ordered node indices returned by an index function.
using IndexSet = std::vector<std::size_t>;

/// Node layout of a grid model plus its index function U(x).
///
/// Regular grids place N_a nodes per axis uniformly over the domain box and
/// flatten multi-indices with axis 0 fastest: flat = i_0 + N_0 * (i_1 + N_1 * i_2).
/// Irregular grids hold explicit node positions and return the k nearest nodes.
class GridGeometry {
 public:
  static GridGeometry regular(std::vector<int> resolution, std::vector<Interval> bounds = {});
  static GridGeometry irregular(RowMatrix nodes, int neighbors, std::vector<Interval> bounds = {});

  GridKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return static_cast<int>(bounds_.size()); }
  std::size_t node_count() const noexcept { return node_count_; }
  /// |U(x)|: 2^D corners for regular grids, k for irregular ones.
  int stencil_width() const noexcept;

  const std::vector<int>& resolution() const noexcept { return resolution_; }
  const std::vector<Interval>& bounds() const noexcept { return bounds_; }
  int neighbors() const noexcept { return neighbors_; }
  const RowMatrix& nodes() const noexcept { return nodes_; }

  /// Width of one cell along `axis` (regular grids only).
  double cell_width(int axis) const;

  /// Node position in domain coordinates.
  void node_position(std::size_t node, std::span<double> out) const;
  /// Node position mapped to [0,1]^D through the domain box.
  void node_unit_center(std::size_t node, std::span<double> out) const;
  /// Query mapped to [0,1]^D, clamped to the box.
  void to_unit(Point x, std::span<double> out) const;

  IndexSet index(Point x) const;

 private:
  GridKind kind_ = GridKind::Regular;
  std::vector<int> resolution_;
  std::vector<Interval> bounds_;
  RowMatrix nodes_;
  int neighbors_ = 0;
  std::size_t node_count_ = 0;
};

/// Corner indices of the cell containing x, in lexicographic corner-offset
/// order (axis 0 offset varies slowest). Out-of-box queries are clamped.
IndexSet index_regular(const GridGeometry& geometry, Point x);

/// k nearest nodes by Euclidean distance (ties to the lower index), returned
/// in ascending index order.
IndexSet index_irregular(const GridGeometry& geometry, Point x);

/// Per-axis cell coordinate of a regular-grid query: lower node index and
/// fractional position inside the cell. Faces between cells go to the lower cell.
struct CellCoordinate {
  int lower = 0;
  double frac = 0.0;
};
CellCoordinate locate_axis(const GridGeometry& geometry, int axis, double x);

}  // namespace mfgrid
