#include "mfgrid/batch.hpp"

#include <cmath>

#include "mfgrid/errors.hpp"

namespace mfgrid {

SampleStencil::SampleStencil(const GridModel& model, const RowMatrix& points)
    : count_(static_cast<std::size_t>(points.rows())), width_(model.geometry().stencil_width()), points_(points) {
  const auto& geometry = model.geometry();
  if (points.cols() != geometry.dim()) throw ConfigError("stencil: point dimension does not match geometry");
  indices_.resize(count_ * static_cast<std::size_t>(width_));
  const auto* params = model.kernel_params();
  if (params) fourier_width_ = static_cast<std::size_t>(params->input_width());
  fourier_.resize(count_ * fourier_width_);
  const auto dim = static_cast<std::size_t>(geometry.dim());

#pragma omp parallel
  {
    std::vector<double> unit(dim);
#pragma omp for schedule(static)
    for (std::ptrdiff_t is = 0; is < static_cast<std::ptrdiff_t>(count_); ++is) {
      const auto i = static_cast<std::size_t>(is);
      const auto x = row_of(points_, static_cast<Eigen::Index>(i));
      const auto idx = geometry.index(x);
      std::copy(idx.begin(), idx.end(), indices_.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(width_)));
      if (params) {
        geometry.to_unit(x, unit);
        fourier_features(unit, params->shape().d_f, {fourier_.data() + i * fourier_width_, fourier_width_});
      }
    }
  }
}

namespace {

void ensure_shape(const GridModel& model, const SampleStencil& stencil, StencilWeights& out) {
  const auto n = static_cast<Eigen::Index>(stencil.size());
  if (out.weights.rows() != n || out.weights.cols() != stencil.width()) {
    out.weights = RowMatrix::Zero(n, stencil.width());
    out.raw_sum.assign(stencil.size(), 1.0);
    out.fallback.assign(stencil.size(), 0);
  }
  if (const auto* p = model.kernel_params()) {
    if (out.head_inputs.rows() != n || out.head_inputs.cols() != p->layer_rows(0))
      out.head_inputs = RowMatrix::Zero(n, p->layer_rows(0));
  }
}

}  // namespace

void compute_weights(const GridModel& model, const SampleStencil& stencil, StencilWeights& out,
                     std::optional<std::span<const std::size_t>> subset, const MulFANodeTable* table) {
  ensure_shape(model, stencil, out);
  const auto& geometry = model.geometry();
  const auto width = static_cast<std::size_t>(stencil.width());
  const auto count = subset ? subset->size() : stencil.size();
  const auto sample_at = [&](std::size_t k) { return subset ? (*subset)[k] : k; };

  if (std::holds_alternative<Multilinear>(model.kernel())) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(count); ++ks) {
      const auto i = sample_at(static_cast<std::size_t>(ks));
      multilinear_weights(geometry, row_of(stencil.points(), static_cast<Eigen::Index>(i)),
                          row_of(out.weights, static_cast<Eigen::Index>(i)));
    }
    return;
  }

  if (const auto* rbf = std::get_if<GaussianRbf>(&model.kernel())) {
    const double inv = 1.0 / (2.0 * rbf->sigma * rbf->sigma);
    const auto dim = static_cast<std::size_t>(geometry.dim());
#pragma omp parallel
    {
      std::vector<double> pos(dim), raw(width);
#pragma omp for schedule(static)
      for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(count); ++ks) {
        const auto i = sample_at(static_cast<std::size_t>(ks));
        const auto x = row_of(stencil.points(), static_cast<Eigen::Index>(i));
        const auto idx = stencil.indices(i);
        double sum = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
          geometry.node_position(idx[k], pos);
          double d2 = 0.0;
          for (std::size_t a = 0; a < dim; ++a) d2 += (x[a] - pos[a]) * (x[a] - pos[a]);
          raw[k] = std::exp(-d2 * inv);
          sum += raw[k];
        }
        out.fallback[i] = kernel_normalize(raw, row_of(out.weights, static_cast<Eigen::Index>(i)));
        out.raw_sum[i] = sum;
      }
    }
    return;
  }

  const auto& params = *model.kernel_params();
  std::optional<MulFANodeTable> owned;
  if (!table) {
    owned.emplace(params, geometry);
    table = &*owned;
  }
  const auto hw = static_cast<std::size_t>(table->head_width());
#pragma omp parallel
  {
    std::vector<double> raw(width);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(count); ++ks) {
      const auto i = sample_at(static_cast<std::size_t>(ks));
      std::span<double> a{out.head_inputs.data() + i * hw, hw};
      table->head_input(stencil.fourier(i), a);
      const auto idx = stencil.indices(i);
      double sum = 0.0;
      for (std::size_t k = 0; k < width; ++k) {
        raw[k] = table->raw(idx[k], a);
        sum += raw[k];
      }
      out.fallback[i] = kernel_normalize(raw, row_of(out.weights, static_cast<Eigen::Index>(i)));
      out.raw_sum[i] = sum;
    }
  }
}

StencilWeights compute_weights(const GridModel& model, const SampleStencil& stencil) {
  StencilWeights out;
  compute_weights(model, stencil, out);
  return out;
}

StencilWeights compute_weights_reference(const GridModel& model, const SampleStencil& stencil) {
  StencilWeights out;
  ensure_shape(model, stencil, out);
  for (std::size_t i = 0; i < stencil.size(); ++i) {
    const auto idx = stencil.indices(i);
    const IndexSet set(idx.begin(), idx.end());
    bool fb = false;
    const auto w = kernel_eval(model.kernel(), row_of(stencil.points(), static_cast<Eigen::Index>(i)), set,
                               model.geometry(), &fb);
    for (std::size_t k = 0; k < w.size(); ++k) out.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = w[k];
    out.fallback[i] = fb;
  }
  return out;
}

RowMatrix batch_forward(const RowMatrix& features, const SampleStencil& stencil, const RowMatrix& weights) {
  const auto n = static_cast<Eigen::Index>(stencil.size());
  const auto d = features.cols();
  RowMatrix out = RowMatrix::Zero(n, d);
  const auto width = static_cast<std::size_t>(stencil.width());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = stencil.indices(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < width; ++k) {
      const double wk = weights(i, static_cast<Eigen::Index>(k));
      const double* f = features.data() + static_cast<Eigen::Index>(idx[k]) * d;
      for (Eigen::Index c = 0; c < d; ++c) out(i, c) += wk * f[c];
    }
  }
  return out;
}

RowMatrix batch_forward_reference(const RowMatrix& features, const SampleStencil& stencil, const RowMatrix& weights) {
  const auto n = static_cast<Eigen::Index>(stencil.size());
  RowMatrix out = RowMatrix::Zero(n, features.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = stencil.indices(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < idx.size(); ++k)
      out.row(i) += weights(i, static_cast<Eigen::Index>(k)) * features.row(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

RowMatrix evaluate(const GridModel& model, const RowMatrix& points) {
  const SampleStencil stencil(model, points);
  const auto w = compute_weights(model, stencil);
  return batch_forward(model.features(), stencil, w.weights);
}

}  // namespace mfgrid
