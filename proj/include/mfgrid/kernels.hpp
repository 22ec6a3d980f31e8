#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "mfgrid/geometry.hpp"
#include "mfgrid/types.hpp"

namespace mfgrid {

/// Below this magnitude the normalization denominator is treated as singular.
inline constexpr double kNormalizeEpsilon = 1e-8;

struct MulFAShape {
  int dim = 2;    ///< query dimension D
  int d_f = 10;   ///< Fourier features per axis
  int n_m = 3;    ///< filter layers (linear layers in the chain)
  int d_h = 16;   ///< hidden width
};

/// Shared parameter set of the multiplicative-filter kernel, stored as one
/// flat vector so optimizers and finite-difference checks can treat it as Θ.
///
/// Layer l in [0, n_m) is an affine map W_l z + b_l. Layers below n_m - 1 are
/// d_h wide; the last layer is scalar. Filter f in [0, n_m - 1) is
/// sin(omega_f c + phase_f), where c is the node center in [0,1]^D, and scales
/// the output of layer f element-wise before layer f + 1.
class MulFAParams {
 public:
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  explicit MulFAParams(MulFAShape shape);

  /// Frequency-scaled initialization: omega ~ U[-omega_scale, omega_scale],
  /// phase ~ U[0, 2pi], W ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], hidden biases 0,
  /// output bias `output_bias`.
  static MulFAParams random(MulFAShape shape, std::mt19937_64& rng, double omega_scale, double output_bias);

  const MulFAShape& shape() const noexcept { return shape_; }
  int input_width() const noexcept { return shape_.dim * shape_.d_f; }
  int layer_rows(int layer) const noexcept { return layer + 1 == shape_.n_m ? 1 : shape_.d_h; }
  int layer_cols(int layer) const noexcept { return layer == 0 ? input_width() : shape_.d_h; }
  int filter_count() const noexcept { return shape_.n_m - 1; }

  MatrixMap weight(int layer);
  ConstMatrixMap weight(int layer) const;
  VectorMap bias(int layer);
  ConstVectorMap bias(int layer) const;
  MatrixMap omega(int filter);
  ConstMatrixMap omega(int filter) const;
  VectorMap phase(int filter);
  ConstVectorMap phase(int filter) const;

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  void set_zero();

  bool same_shape(const MulFAParams& other) const noexcept;

 private:
  struct Block {
    std::size_t offset;
    int rows;
    int cols;
  };
  MulFAShape shape_;
  std::vector<Block> weights_, biases_, omegas_, phases_;
  std::vector<double> data_;
};

struct Multilinear {};

struct GaussianRbf {
  double sigma = 0.0;  ///< <= 0 means "resolve from geometry" at model construction
};

struct MulFA {
  MulFAParams params;
};

using KernelSpec = std::variant<Multilinear, GaussianRbf, MulFA>;

/// gamma(x, j) for j = 1..d_f per axis, axes concatenated. Odd j gives
/// cos(2^floor(j/2) pi x), even j gives sin(2^floor(j/2) pi x).
std::vector<double> fourier_features(Point x, int d_f);
void fourier_features(Point x, int d_f, std::span<double> out);

/// Raw kernel value for one node: the filter chain evaluated directly.
/// `x_unit` and `node_unit` are both in [0,1]^D.
double mfn_unnormalized(Point x_unit, Point node_unit, const MulFAParams& params);

/// raw_i / sum(raw). Falls back to uniform weights when |sum| < kNormalizeEpsilon.
/// Returns true when the fallback was taken.
bool kernel_normalize(std::span<const double> raw, std::span<double> out);
std::vector<double> kernel_normalize(std::span<const double> raw);

/// Cotangent of the raw values given the cotangent of the normalized weights.
/// Zero when the fallback was active.
void kernel_normalize_backward(std::span<const double> weights, double raw_sum, bool fallback,
                               std::span<const double> upstream, std::span<double> raw_cotangent);

/// Weights phi(x, Theta_i) over `index_set`.
std::vector<double> kernel_eval(const KernelSpec& spec, Point x, const IndexSet& index_set,
                                const GridGeometry& geometry, bool* fallback = nullptr);

/// Reverse-mode gradient of <upstream, kernel_eval(MulFA)> with respect to
/// every parameter. The accumulating overload adds into `grad`.
MulFAParams kernel_grad_params(const MulFAParams& params, Point x, const IndexSet& index_set,
                               const GridGeometry& geometry, std::span<const double> upstream);
void kernel_grad_params_accumulate(const MulFAParams& params, Point x, const IndexSet& index_set,
                                   const GridGeometry& geometry, std::span<const double> upstream,
                                   MulFAParams& grad);

/// Tensor-product linear interpolation weights for a regular grid.
void multilinear_weights(const GridGeometry& geometry, Point x, std::span<double> out);

/// Default Gaussian bandwidth: one cell width (smallest axis) for regular
/// grids, mean k-NN node spacing for irregular ones.
double default_rbf_sigma(const GridGeometry& geometry);

}  // namespace mfgrid
