#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfgrid/geometry.hpp"
#include "mfgrid/kernels.hpp"

namespace mfgrid {

/// Per-node factorization of the filter chain for batched evaluation.
///
/// The chain is affine in the output of its first layer, a(x) = W_0 z(x) + b_0,
/// so for a fixed Θ every node reduces to raw(x, node) = head(node) . a(x) + offset(node).
/// The table holds head/offset and the filter values for every node; it is
/// rebuilt whenever Θ changes.
class MulFANodeTable {
 public:
  MulFANodeTable(const MulFAParams& params, const GridGeometry& geometry);

  int head_width() const noexcept { return head_width_; }
  std::span<const double> head(std::size_t node) const {
    return {heads_.data() + node * static_cast<std::size_t>(head_width_), static_cast<std::size_t>(head_width_)};
  }
  double offset(std::size_t node) const { return offsets_[node]; }

  /// a = W_0 z + b_0.
  void head_input(std::span<const double> z, std::span<double> a) const;

  double raw(std::size_t node, std::span<const double> a) const;

  /// Adds the gradient of head(node).A + offset(node).U with respect to the
  /// node-dependent parameters (layers >= 1 and all filters).
  void accumulate_node_grad(std::size_t node, std::span<const double> A, double U, MulFAParams& grad) const;

  /// Adds the first-layer gradient for one sample: dW_0 += g z^T, db_0 += g.
  void accumulate_head_grad(std::span<const double> z, std::span<const double> g, MulFAParams& grad) const;

 private:
  const double* filter(std::size_t node, int f) const {
    return filters_.data() + (node * static_cast<std::size_t>(filter_count_) + static_cast<std::size_t>(f)) * d_h_;
  }
  const double* filter_cos(std::size_t node, int f) const {
    return filter_cos_.data() + (node * static_cast<std::size_t>(filter_count_) + static_cast<std::size_t>(f)) * d_h_;
  }

  const MulFAParams* params_;
  const GridGeometry* geometry_;
  int head_width_;
  int filter_count_;
  std::size_t d_h_;
  std::vector<double> filters_;
  std::vector<double> filter_cos_;
  std::vector<double> heads_;
  std::vector<double> offsets_;
};

}  // namespace mfgrid
