#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "mfgrid/geometry.hpp"
#include "mfgrid/kernels.hpp"
#include "mfgrid/types.hpp"

namespace mfgrid {

/// Sparse vector over the m grid nodes.
struct SparseWeights {
  std::vector<std::size_t> indices;
  std::vector<double> values;
};

/// The four-element tuple <phi, Theta, U, w>: geometry (and thus U), kernel
/// (phi with its parameters Theta) and an m x d feature grid w.
class GridModel {
 public:
  GridModel(GridGeometry geometry, KernelSpec kernel, int output_dim);

  const GridGeometry& geometry() const noexcept { return geometry_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  KernelSpec& kernel() noexcept { return kernel_; }
  const RowMatrix& features() const noexcept { return features_; }
  RowMatrix& features() noexcept { return features_; }
  int output_dim() const noexcept { return static_cast<int>(features_.cols()); }
  int dim() const noexcept { return geometry_.dim(); }

  bool has_kernel_params() const noexcept { return std::holds_alternative<MulFA>(kernel_); }
  MulFAParams* kernel_params() noexcept;
  const MulFAParams* kernel_params() const noexcept;

  /// Features uniform in [-half_width, half_width].
  void init_features_uniform(double half_width, std::mt19937_64& rng);

 private:
  GridGeometry geometry_;
  KernelSpec kernel_;
  RowMatrix features_;
};

/// Kernel weights over U(x).
struct NodeWeights {
  IndexSet indices;
  std::vector<double> weights;
  bool fallback = false;
};
NodeWeights node_weights(const GridModel& model, Point x);

/// sum_{i in U(x)} phi(x, Theta_i) w_i.
std::vector<double> model_forward(const GridModel& model, Point x);

/// dg(x, w)/dw: the kernel weights scattered onto U(x); exact zeros dropped,
/// entries sorted by node index.
SparseWeights grad_wrt_features(const GridModel& model, Point x);

}  // namespace mfgrid
