#include "mfgrid/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfgrid/errors.hpp"

namespace mfgrid {

MulFAParams::MulFAParams(MulFAShape shape) : shape_(shape) {
  if (shape.dim < 1 || shape.d_f < 1 || shape.n_m < 1 || shape.d_h < 1)
    throw ConfigError("kernel: mulfa requires dim, d_f, n_m, d_h >= 1");
  std::size_t offset = 0;
  for (int l = 0; l < shape.n_m; ++l) {
    weights_.push_back({offset, layer_rows(l), layer_cols(l)});
    offset += static_cast<std::size_t>(layer_rows(l) * layer_cols(l));
    biases_.push_back({offset, layer_rows(l), 1});
    offset += static_cast<std::size_t>(layer_rows(l));
  }
  for (int f = 0; f < filter_count(); ++f) {
    omegas_.push_back({offset, shape.d_h, shape.dim});
    offset += static_cast<std::size_t>(shape.d_h * shape.dim);
    phases_.push_back({offset, shape.d_h, 1});
    offset += static_cast<std::size_t>(shape.d_h);
  }
  data_.assign(offset, 0.0);
}

MulFAParams MulFAParams::random(MulFAShape shape, std::mt19937_64& rng, double omega_scale, double output_bias) {
  MulFAParams p(shape);
  for (int l = 0; l < shape.n_m; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_cols(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = p.weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  }
  p.bias(shape.n_m - 1)(0) = output_bias;
  std::uniform_real_distribution<double> freq(-omega_scale, omega_scale);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (int f = 0; f < p.filter_count(); ++f) {
    auto o = p.omega(f);
    for (Eigen::Index i = 0; i < o.size(); ++i) o.data()[i] = freq(rng);
    auto ph = p.phase(f);
    for (Eigen::Index i = 0; i < ph.size(); ++i) ph(i) = phase(rng);
  }
  return p;
}

MulFAParams::MatrixMap MulFAParams::weight(int l) {
  const auto& b = weights_[static_cast<std::size_t>(l)];
  return {data_.data() + b.offset, b.rows, b.cols};
}
MulFAParams::ConstMatrixMap MulFAParams::weight(int l) const {
  const auto& b = weights_[static_cast<std::size_t>(l)];
  return {data_.data() + b.offset, b.rows, b.cols};
}
MulFAParams::VectorMap MulFAParams::bias(int l) {
  const auto& b = biases_[static_cast<std::size_t>(l)];
  return {data_.data() + b.offset, b.rows};
}
MulFAParams::ConstVectorMap MulFAParams::bias(int l) const {
  const auto& b = biases_[static_cast<std::size_t>(l)];
  return {data_.data() + b.offset, b.rows};
}
MulFAParams::MatrixMap MulFAParams::omega(int f) {
  const auto& b = omegas_[static_cast<std::size_t>(f)];
  return {data_.data() + b.offset, b.rows, b.cols};
}
MulFAParams::ConstMatrixMap MulFAParams::omega(int f) const {
  const auto& b = omegas_[static_cast<std::size_t>(f)];
  return {data_.data() + b.offset, b.rows, b.cols};
}
MulFAParams::VectorMap MulFAParams::phase(int f) {
  const auto& b = phases_[static_cast<std::size_t>(f)];
  return {data_.data() + b.offset, b.rows};
}
MulFAParams::ConstVectorMap MulFAParams::phase(int f) const {
  const auto& b = phases_[static_cast<std::size_t>(f)];
  return {data_.data() + b.offset, b.rows};
}

void MulFAParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool MulFAParams::same_shape(const MulFAParams& other) const noexcept {
  return shape_.dim == other.shape_.dim && shape_.d_f == other.shape_.d_f && shape_.n_m == other.shape_.n_m &&
         shape_.d_h == other.shape_.d_h;
}

void fourier_features(Point x, int d_f, std::span<double> out) {
  std::size_t k = 0;
  for (double xa : x) {
    for (int j = 1; j <= d_f; ++j) {
      const double freq = std::ldexp(std::numbers::pi, j / 2);
      out[k++] = (j % 2 == 0) ? std::sin(freq * xa) : std::cos(freq * xa);
    }
  }
}

std::vector<double> fourier_features(Point x, int d_f) {
  if (d_f < 1) throw ConfigError("fourier_features: d_f must be >= 1");
  std::vector<double> out(x.size() * static_cast<std::size_t>(d_f));
  fourier_features(x, d_f, out);
  return out;
}

namespace {

/// Forward pass of the filter chain with every intermediate kept for backprop.
struct ChainTrace {
  std::vector<Vector> z;       // z[l]: input of layer l
  std::vector<Vector> a;       // a[l]: output of layer l
  std::vector<Vector> arg;     // arg[f] = omega_f c + phase_f
  std::vector<Vector> filter;  // sin(arg[f])
};

ChainTrace run_chain(Point x_unit, Point node_unit, const MulFAParams& p) {
  const auto& s = p.shape();
  ChainTrace t;
  Vector z(p.input_width());
  fourier_features(x_unit, s.d_f, {z.data(), static_cast<std::size_t>(z.size())});
  Eigen::Map<const Vector> c(node_unit.data(), static_cast<Eigen::Index>(node_unit.size()));
  for (int l = 0; l < s.n_m; ++l) {
    t.z.push_back(z);
    Vector a = p.weight(l) * z + p.bias(l);
    t.a.push_back(a);
    if (l + 1 < s.n_m) {
      Vector arg = p.omega(l) * c + p.phase(l);
      Vector filt = arg.array().sin();
      z = a.cwiseProduct(filt);
      t.arg.push_back(std::move(arg));
      t.filter.push_back(std::move(filt));
    }
  }
  return t;
}

/// Adds scale * d(raw)/d(Theta) for one node into grad.
void chain_backward(const ChainTrace& t, Point node_unit, const MulFAParams& p, double scale, MulFAParams& grad) {
  const int n_m = p.shape().n_m;
  Eigen::Map<const Vector> c(node_unit.data(), static_cast<Eigen::Index>(node_unit.size()));
  Vector g_a = Vector::Constant(1, scale);
  for (int l = n_m - 1; l >= 0; --l) {
    grad.weight(l).noalias() += g_a * t.z[static_cast<std::size_t>(l)].transpose();
    grad.bias(l) += g_a;
    if (l == 0) break;
    const auto f = static_cast<std::size_t>(l - 1);
    const Vector g_z = p.weight(l).transpose() * g_a;
    const Vector g_filter = g_z.cwiseProduct(t.a[f]);
    const Vector g_arg = g_filter.cwiseProduct(t.arg[f].array().cos().matrix());
    grad.omega(l - 1).noalias() += g_arg * c.transpose();
    grad.phase(l - 1) += g_arg;
    g_a = g_z.cwiseProduct(t.filter[f]);
  }
}

}  // namespace

double mfn_unnormalized(Point x_unit, Point node_unit, const MulFAParams& params) {
  if (static_cast<int>(x_unit.size()) != params.shape().dim || static_cast<int>(node_unit.size()) != params.shape().dim)
    throw ConfigError("mfn_unnormalized: coordinate dimension does not match kernel dimension");
  return run_chain(x_unit, node_unit, params).a.back()(0);
}

bool kernel_normalize(std::span<const double> raw, std::span<double> out) {
  double sum = 0.0;
  for (double r : raw) sum += r;
  if (std::abs(sum) < kNormalizeEpsilon) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(raw.size()));
    return true;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / sum;
  return false;
}

std::vector<double> kernel_normalize(std::span<const double> raw) {
  std::vector<double> out(raw.size());
  kernel_normalize(raw, out);
  return out;
}

void kernel_normalize_backward(std::span<const double> weights, double raw_sum, bool fallback,
                               std::span<const double> upstream, std::span<double> raw_cotangent) {
  if (fallback) {
    std::fill(raw_cotangent.begin(), raw_cotangent.end(), 0.0);
    return;
  }
  double mean = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) mean += upstream[j] * weights[j];
  for (std::size_t k = 0; k < weights.size(); ++k) raw_cotangent[k] = (upstream[k] - mean) / raw_sum;
}

void multilinear_weights(const GridGeometry& geometry, Point x, std::span<double> out) {
  const int dim = geometry.dim();
  std::fill(out.begin(), out.end(), 1.0);
  for (int a = 0; a < dim; ++a) {
    const double frac = locate_axis(geometry, a, x[static_cast<std::size_t>(a)]).frac;
    for (std::size_t corner = 0; corner < out.size(); ++corner) {
      const bool upper = (corner >> (dim - 1 - a)) & 1U;
      out[corner] *= upper ? frac : 1.0 - frac;
    }
  }
}

double default_rbf_sigma(const GridGeometry& geometry) {
  if (geometry.kind() == GridKind::Regular) {
    double w = geometry.cell_width(0);
    for (int a = 1; a < geometry.dim(); ++a) w = std::min(w, geometry.cell_width(a));
    return w;
  }
  const auto& nodes = geometry.nodes();
  const auto m = nodes.rows();
  if (m < 2) return 1.0;
  const auto k = std::min<Eigen::Index>(geometry.neighbors(), m - 1);
  double total = 0.0;
  std::vector<double> dist;
  for (Eigen::Index i = 0; i < m; ++i) {
    dist.clear();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != i) dist.push_back((nodes.row(i) - nodes.row(j)).norm());
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (Eigen::Index j = 0; j < k; ++j) total += dist[static_cast<std::size_t>(j)];
  }
  const double sigma = total / static_cast<double>(m * k);
  return sigma > 0.0 ? sigma : 1.0;
}

std::vector<double> kernel_eval(const KernelSpec& spec, Point x, const IndexSet& index_set,
                                const GridGeometry& geometry, bool* fallback) {
  const int dim = geometry.dim();
  std::vector<double> out(index_set.size());
  bool fell_back = false;
  if (std::holds_alternative<Multilinear>(spec)) {
    if (geometry.kind() != GridKind::Regular) throw ConfigError("kernel: multilinear requires a regular grid");
    multilinear_weights(geometry, x, out);
  } else if (const auto* rbf = std::get_if<GaussianRbf>(&spec)) {
    const double sigma = rbf->sigma > 0.0 ? rbf->sigma : default_rbf_sigma(geometry);
    std::vector<double> pos(static_cast<std::size_t>(dim));
    std::vector<double> raw(index_set.size());
    for (std::size_t i = 0; i < index_set.size(); ++i) {
      geometry.node_position(index_set[i], pos);
      double d2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double d = x[static_cast<std::size_t>(a)] - pos[static_cast<std::size_t>(a)];
        d2 += d * d;
      }
      raw[i] = std::exp(-d2 / (2.0 * sigma * sigma));
    }
    fell_back = kernel_normalize(raw, out);
  } else {
    const auto& params = std::get<MulFA>(spec).params;
    std::vector<double> xu(static_cast<std::size_t>(dim));
    std::vector<double> cu(static_cast<std::size_t>(dim));
    geometry.to_unit(x, xu);
    std::vector<double> raw(index_set.size());
    for (std::size_t i = 0; i < index_set.size(); ++i) {
      geometry.node_unit_center(index_set[i], cu);
      raw[i] = mfn_unnormalized(xu, cu, params);
    }
    fell_back = kernel_normalize(raw, out);
  }
  if (fallback) *fallback = fell_back;
  return out;
}

void kernel_grad_params_accumulate(const MulFAParams& params, Point x, const IndexSet& index_set,
                                   const GridGeometry& geometry, std::span<const double> upstream,
                                   MulFAParams& grad) {
  if (!grad.same_shape(params)) throw ConfigError("kernel_grad_params: gradient buffer shape mismatch");
  const auto dim = static_cast<std::size_t>(geometry.dim());
  const std::size_t width = index_set.size();
  std::vector<double> xu(dim);
  geometry.to_unit(x, xu);
  std::vector<std::vector<double>> centers(width, std::vector<double>(dim));
  std::vector<ChainTrace> traces;
  std::vector<double> raw(width);
  double sum = 0.0;
  for (std::size_t i = 0; i < width; ++i) {
    geometry.node_unit_center(index_set[i], centers[i]);
    traces.push_back(run_chain(xu, centers[i], params));
    raw[i] = traces.back().a.back()(0);
    sum += raw[i];
  }
  std::vector<double> weights(width);
  const bool fallback = kernel_normalize(raw, weights);
  std::vector<double> raw_cot(width);
  kernel_normalize_backward(weights, sum, fallback, upstream, raw_cot);
  for (std::size_t i = 0; i < width; ++i) {
    if (raw_cot[i] != 0.0) chain_backward(traces[i], centers[i], params, raw_cot[i], grad);
  }
}

MulFAParams kernel_grad_params(const MulFAParams& params, Point x, const IndexSet& index_set,
                               const GridGeometry& geometry, std::span<const double> upstream) {
  MulFAParams grad(params.shape());
  kernel_grad_params_accumulate(params, x, index_set, geometry, upstream, grad);
  return grad;
}

}  // namespace mfgrid
