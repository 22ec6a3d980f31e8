#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mfgrid/model.hpp"
#include "mfgrid/mulfa_table.hpp"

namespace mfgrid {

/// Index sets (and Fourier features, for MulFA kernels) of a fixed batch of
/// queries. Neither depends on w or Θ, so they are computed once per dataset.
class SampleStencil {
 public:
  SampleStencil(const GridModel& model, const RowMatrix& points);

  std::size_t size() const noexcept { return count_; }
  int width() const noexcept { return width_; }
  std::span<const std::size_t> indices(std::size_t i) const {
    return {indices_.data() + i * static_cast<std::size_t>(width_), static_cast<std::size_t>(width_)};
  }
  /// Fourier features of sample i; empty unless the kernel is MulFA.
  std::span<const double> fourier(std::size_t i) const {
    if (fourier_width_ == 0) return {};
    return {fourier_.data() + i * fourier_width_, fourier_width_};
  }
  const RowMatrix& points() const noexcept { return points_; }

 private:
  std::size_t count_ = 0;
  int width_ = 0;
  std::size_t fourier_width_ = 0;
  RowMatrix points_;
  std::vector<std::size_t> indices_;
  std::vector<double> fourier_;
};

/// Kernel weights for every sample of a stencil (n x K), plus what the
/// normalization backward pass needs.
struct StencilWeights {
  RowMatrix weights;
  std::vector<double> raw_sum;
  std::vector<unsigned char> fallback;
  RowMatrix head_inputs;  ///< first-layer outputs a(x), MulFA only
};

/// Parallel evaluation over samples. When `subset` is given only those rows
/// are (re)computed. `table` must match the model's current Θ if supplied.
void compute_weights(const GridModel& model, const SampleStencil& stencil, StencilWeights& out,
                     std::optional<std::span<const std::size_t>> subset = std::nullopt,
                     const MulFANodeTable* table = nullptr);
StencilWeights compute_weights(const GridModel& model, const SampleStencil& stencil);

/// Serial reference: kernel_eval per sample.
StencilWeights compute_weights_reference(const GridModel& model, const SampleStencil& stencil);

/// Outputs g(X_i) = sum_k weights(i,k) w_{idx(i,k)} (n x d), parallel over samples.
RowMatrix batch_forward(const RowMatrix& features, const SampleStencil& stencil, const RowMatrix& weights);
/// Serial reference of batch_forward.
RowMatrix batch_forward_reference(const RowMatrix& features, const SampleStencil& stencil, const RowMatrix& weights);

/// Model outputs at arbitrary points (builds a stencil internally).
RowMatrix evaluate(const GridModel& model, const RowMatrix& points);

}  // namespace mfgrid
