#pragma once

#include <cstdint>
#include <numbers>
#include <vector>

#include "mfgrid/model.hpp"

namespace mfgrid {

enum class KernelVariant { Multilinear, GaussianRbf, MulFA };

struct KernelConfig {
  KernelVariant variant = KernelVariant::MulFA;
  int d_f = 10;
  int n_m = 3;
  int d_h = 16;
  double sigma = 0.0;  ///< Gaussian bandwidth, <= 0 selects the geometry default
  double omega_scale = 32.0 * std::numbers::pi;
  double output_bias = 1.0;
};

struct GeometryConfig {
  GridKind kind = GridKind::Regular;
  /// Nodes per axis; a single entry is broadcast to every axis.
  std::vector<int> resolution{16};
  std::vector<Interval> bounds;  ///< empty = unit cube
  RowMatrix points;              ///< irregular node positions
  int random_points = 0;         ///< irregular: draw this many uniform nodes when `points` is empty
  int k = 8;
};

enum class FeatureInit { Zeros, Uniform };

struct ModelConfig {
  GeometryConfig geometry;
  KernelConfig kernel;
  FeatureInit init = FeatureInit::Zeros;
  double init_scale = 1e-4;
};

GridGeometry build_geometry(const GeometryConfig& config, int dim, std::uint64_t seed);

/// Geometry, kernel (random MulFA parameters drawn from `seed`) and features.
GridModel build_model(const ModelConfig& config, int dim, int output_dim, std::uint64_t seed);

}  // namespace mfgrid
