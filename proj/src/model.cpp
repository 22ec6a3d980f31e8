#include "mfgrid/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfgrid/errors.hpp"
#include "mfgrid/model_config.hpp"

namespace mfgrid {

GridModel::GridModel(GridGeometry geometry, KernelSpec kernel, int output_dim)
    : geometry_(std::move(geometry)), kernel_(std::move(kernel)) {
  if (output_dim < 1) throw ConfigError("model: output dimension must be >= 1");
  if (std::holds_alternative<Multilinear>(kernel_) && geometry_.kind() != GridKind::Regular)
    throw ConfigError("kernel: multilinear requires a regular grid");
  if (auto* rbf = std::get_if<GaussianRbf>(&kernel_)) {
    if (rbf->sigma <= 0.0) rbf->sigma = default_rbf_sigma(geometry_);
  }
  if (const auto* mf = std::get_if<MulFA>(&kernel_)) {
    if (mf->params.shape().dim != geometry_.dim())
      throw ConfigError("kernel: mulfa parameter dimension does not match geometry dimension");
    for (double v : mf->params.values()) {
      if (!std::isfinite(v)) throw ConfigError("kernel: mulfa parameters must be finite");
    }
  }
  features_ = RowMatrix::Zero(static_cast<Eigen::Index>(geometry_.node_count()), output_dim);
}

MulFAParams* GridModel::kernel_params() noexcept {
  auto* mf = std::get_if<MulFA>(&kernel_);
  return mf ? &mf->params : nullptr;
}

const MulFAParams* GridModel::kernel_params() const noexcept {
  const auto* mf = std::get_if<MulFA>(&kernel_);
  return mf ? &mf->params : nullptr;
}

void GridModel::init_features_uniform(double half_width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-half_width, half_width);
  for (Eigen::Index i = 0; i < features_.size(); ++i) features_.data()[i] = dist(rng);
}

NodeWeights node_weights(const GridModel& model, Point x) {
  NodeWeights out;
  out.indices = model.geometry().index(x);
  out.weights = kernel_eval(model.kernel(), x, out.indices, model.geometry(), &out.fallback);
  return out;
}

std::vector<double> model_forward(const GridModel& model, Point x) {
  const auto nw = node_weights(model, x);
  const auto& w = model.features();
  std::vector<double> out(static_cast<std::size_t>(w.cols()), 0.0);
  for (std::size_t i = 0; i < nw.indices.size(); ++i) {
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      out[static_cast<std::size_t>(c)] += nw.weights[i] * w(static_cast<Eigen::Index>(nw.indices[i]), c);
  }
  return out;
}

SparseWeights grad_wrt_features(const GridModel& model, Point x) {
  const auto nw = node_weights(model, x);
  std::vector<std::size_t> order(nw.indices.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nw.indices[a] < nw.indices[b]; });
  SparseWeights out;
  for (std::size_t k : order) {
    if (nw.weights[k] == 0.0) continue;
    out.indices.push_back(nw.indices[k]);
    out.values.push_back(nw.weights[k]);
  }
  return out;
}

GridGeometry build_geometry(const GeometryConfig& config, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("geometry: dimension must be >= 1");
  std::vector<Interval> bounds = config.bounds;
  if (!bounds.empty() && static_cast<int>(bounds.size()) != dim)
    throw ConfigError("geometry.bounds: expected " + std::to_string(dim) + " intervals");
  if (config.kind == GridKind::Regular) {
    std::vector<int> res = config.resolution;
    if (res.size() == 1) res.assign(static_cast<std::size_t>(dim), res[0]);
    if (static_cast<int>(res.size()) != dim)
      throw ConfigError("geometry.resolution: expected 1 or " + std::to_string(dim) + " entries");
    return GridGeometry::regular(std::move(res), std::move(bounds));
  }
  RowMatrix nodes = config.points;
  if (nodes.rows() == 0) {
    if (config.random_points < 1) throw ConfigError("geometry.points: irregular grids need node positions or a count");
    if (bounds.empty()) bounds.assign(static_cast<std::size_t>(dim), Interval{});
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    nodes.resize(config.random_points, dim);
    for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
      for (int a = 0; a < dim; ++a) {
        std::uniform_real_distribution<double> u(bounds[static_cast<std::size_t>(a)].lo, bounds[static_cast<std::size_t>(a)].hi);
        nodes(i, a) = u(rng);
      }
    }
  }
  if (nodes.cols() != dim) throw ConfigError("geometry.points: node dimension does not match task dimension");
  return GridGeometry::irregular(std::move(nodes), config.k, std::move(bounds));
}

GridModel build_model(const ModelConfig& config, int dim, int output_dim, std::uint64_t seed) {
  GridGeometry geometry = build_geometry(config.geometry, dim, seed);
  std::mt19937_64 rng(seed);
  KernelSpec kernel;
  switch (config.kernel.variant) {
    case KernelVariant::Multilinear:
      kernel = Multilinear{};
      break;
    case KernelVariant::GaussianRbf:
      kernel = GaussianRbf{config.kernel.sigma};
      break;
    case KernelVariant::MulFA: {
      const MulFAShape shape{dim, config.kernel.d_f, config.kernel.n_m, config.kernel.d_h};
      kernel = MulFA{MulFAParams::random(shape, rng, config.kernel.omega_scale, config.kernel.output_bias)};
      break;
    }
  }
  GridModel model(std::move(geometry), std::move(kernel), output_dim);
  if (config.init == FeatureInit::Uniform) model.init_features_uniform(config.init_scale, rng);
  return model;
}

}  // namespace mfgrid
