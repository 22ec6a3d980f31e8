#include "mfgrid/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfgrid/errors.hpp"

namespace mfgrid {

namespace {

std::vector<Interval> default_bounds(std::vector<Interval> bounds, std::size_t dim) {
  if (bounds.empty()) bounds.assign(dim, Interval{});
  if (bounds.size() != dim) throw ConfigError("geometry: bounds dimension does not match grid dimension");
  for (const auto& b : bounds) {
    if (!(std::isfinite(b.lo) && std::isfinite(b.hi)) || !(b.lo < b.hi))
      throw ConfigError("geometry: bounds require finite min < max on every axis");
  }
  return bounds;
}

}  // namespace

GridGeometry GridGeometry::regular(std::vector<int> resolution, std::vector<Interval> bounds) {
  if (resolution.empty()) throw ConfigError("geometry: resolution must have at least one axis");
  GridGeometry g;
  g.kind_ = GridKind::Regular;
  g.node_count_ = 1;
  for (int n : resolution) {
    if (n < 2) throw ConfigError("geometry: every resolution entry must be >= 2");
    g.node_count_ *= static_cast<std::size_t>(n);
  }
  g.bounds_ = default_bounds(std::move(bounds), resolution.size());
  g.resolution_ = std::move(resolution);
  g.neighbors_ = 1 << g.dim();
  return g;
}

GridGeometry GridGeometry::irregular(RowMatrix nodes, int neighbors, std::vector<Interval> bounds) {
  if (nodes.rows() < 1 || nodes.cols() < 1) throw ConfigError("geometry: irregular grid needs at least one node");
  if (neighbors < 1 || neighbors > nodes.rows())
    throw ConfigError("geometry: irregular neighbor count k must satisfy 1 <= k <= node count");
  if (!nodes.allFinite()) throw ConfigError("geometry: node positions must be finite");
  GridGeometry g;
  g.kind_ = GridKind::Irregular;
  g.bounds_ = default_bounds(std::move(bounds), static_cast<std::size_t>(nodes.cols()));
  g.node_count_ = static_cast<std::size_t>(nodes.rows());
  g.nodes_ = std::move(nodes);
  g.neighbors_ = neighbors;
  return g;
}

int GridGeometry::stencil_width() const noexcept { return neighbors_; }

double GridGeometry::cell_width(int axis) const {
  if (kind_ != GridKind::Regular) throw PreconditionError("cell_width requires a regular grid");
  const auto& b = bounds_[static_cast<std::size_t>(axis)];
  return (b.hi - b.lo) / (resolution_[static_cast<std::size_t>(axis)] - 1);
}

void GridGeometry::node_position(std::size_t node, std::span<double> out) const {
  if (kind_ == GridKind::Irregular) {
    for (int a = 0; a < dim(); ++a) out[static_cast<std::size_t>(a)] = nodes_(static_cast<Eigen::Index>(node), a);
    return;
  }
  std::size_t rest = node;
  for (int a = 0; a < dim(); ++a) {
    const auto n = static_cast<std::size_t>(resolution_[static_cast<std::size_t>(a)]);
    const auto i = rest % n;
    rest /= n;
    const auto& b = bounds_[static_cast<std::size_t>(a)];
    out[static_cast<std::size_t>(a)] = b.lo + (b.hi - b.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
}

void GridGeometry::node_unit_center(std::size_t node, std::span<double> out) const {
  if (kind_ == GridKind::Regular) {
    std::size_t rest = node;
    for (int a = 0; a < dim(); ++a) {
      const auto n = static_cast<std::size_t>(resolution_[static_cast<std::size_t>(a)]);
      out[static_cast<std::size_t>(a)] = static_cast<double>(rest % n) / static_cast<double>(n - 1);
      rest /= n;
    }
    return;
  }
  for (int a = 0; a < dim(); ++a) {
    const auto& b = bounds_[static_cast<std::size_t>(a)];
    out[static_cast<std::size_t>(a)] = (nodes_(static_cast<Eigen::Index>(node), a) - b.lo) / (b.hi - b.lo);
  }
}

void GridGeometry::to_unit(Point x, std::span<double> out) const {
  for (int a = 0; a < dim(); ++a) {
    const auto& b = bounds_[static_cast<std::size_t>(a)];
    out[static_cast<std::size_t>(a)] = std::clamp((x[static_cast<std::size_t>(a)] - b.lo) / (b.hi - b.lo), 0.0, 1.0);
  }
}

IndexSet GridGeometry::index(Point x) const {
  return kind_ == GridKind::Regular ? index_regular(*this, x) : index_irregular(*this, x);
}

CellCoordinate locate_axis(const GridGeometry& geometry, int axis, double x) {
  const auto& b = geometry.bounds()[static_cast<std::size_t>(axis)];
  const int n = geometry.resolution()[static_cast<std::size_t>(axis)];
  const double u = std::clamp((x - b.lo) / (b.hi - b.lo), 0.0, 1.0);
  const double s = u * (n - 1);
  // ceil(s) - 1 puts a query sitting exactly on an interior face into the lower cell.
  int lower = static_cast<int>(std::ceil(s)) - 1;
  lower = std::clamp(lower, 0, n - 2);
  return {lower, s - lower};
}

IndexSet index_regular(const GridGeometry& geometry, Point x) {
  if (geometry.kind() != GridKind::Regular) throw PreconditionError("index_regular requires a regular grid");
  const int dim = geometry.dim();
  std::vector<std::size_t> base(static_cast<std::size_t>(dim));
  std::vector<std::size_t> stride(static_cast<std::size_t>(dim));
  std::size_t s = 1;
  for (int a = 0; a < dim; ++a) {
    base[static_cast<std::size_t>(a)] = static_cast<std::size_t>(locate_axis(geometry, a, x[static_cast<std::size_t>(a)]).lower);
    stride[static_cast<std::size_t>(a)] = s;
    s *= static_cast<std::size_t>(geometry.resolution()[static_cast<std::size_t>(a)]);
  }
  IndexSet out(std::size_t{1} << dim);
  for (std::size_t corner = 0; corner < out.size(); ++corner) {
    std::size_t flat = 0;
    for (int a = 0; a < dim; ++a) {
      // Axis 0 is the most significant bit of the corner counter.
      const std::size_t bit = (corner >> (dim - 1 - a)) & 1U;
      flat += (base[static_cast<std::size_t>(a)] + bit) * stride[static_cast<std::size_t>(a)];
    }
    out[corner] = flat;
  }
  return out;
}

IndexSet index_irregular(const GridGeometry& geometry, Point x) {
  if (geometry.kind() != GridKind::Irregular) throw PreconditionError("index_irregular requires an irregular grid");
  const auto& nodes = geometry.nodes();
  const auto m = static_cast<std::size_t>(nodes.rows());
  const auto k = static_cast<std::size_t>(geometry.neighbors());
  std::vector<double> dist(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (Eigen::Index a = 0; a < nodes.cols(); ++a) {
      const double d = x[static_cast<std::size_t>(a)] - nodes(static_cast<Eigen::Index>(i), a);
      acc += d * d;
    }
    dist[i] = acc;
  }
  IndexSet order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace mfgrid
