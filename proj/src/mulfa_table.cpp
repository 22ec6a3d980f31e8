#include "mfgrid/mulfa_table.hpp"

#include <cmath>

namespace mfgrid {

MulFANodeTable::MulFANodeTable(const MulFAParams& params, const GridGeometry& geometry)
    : params_(&params),
      geometry_(&geometry),
      head_width_(params.layer_rows(0)),
      filter_count_(params.filter_count()),
      d_h_(static_cast<std::size_t>(params.shape().d_h)) {
  const std::size_t m = geometry.node_count();
  const auto hw = static_cast<std::size_t>(head_width_);
  filters_.resize(m * static_cast<std::size_t>(filter_count_) * d_h_);
  filter_cos_.resize(filters_.size());
  heads_.resize(m * hw);
  offsets_.resize(m);
  const int n_m = params.shape().n_m;
  const auto dim = static_cast<std::size_t>(geometry.dim());

#pragma omp parallel
  {
    std::vector<double> c(dim);
    std::vector<double> g, g_z, a, z;
#pragma omp for schedule(static)
    for (std::ptrdiff_t js = 0; js < static_cast<std::ptrdiff_t>(m); ++js) {
      const auto j = static_cast<std::size_t>(js);
      geometry.node_unit_center(j, c);
      for (int f = 0; f < filter_count_; ++f) {
        auto om = params.omega(f);
        auto ph = params.phase(f);
        double* s = filters_.data() + (j * static_cast<std::size_t>(filter_count_) + static_cast<std::size_t>(f)) * d_h_;
        double* sc = filter_cos_.data() + (j * static_cast<std::size_t>(filter_count_) + static_cast<std::size_t>(f)) * d_h_;
        for (std::size_t h = 0; h < d_h_; ++h) {
          double arg = ph(static_cast<Eigen::Index>(h));
          for (std::size_t a_ = 0; a_ < dim; ++a_) arg += om(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(a_)) * c[a_];
          s[h] = std::sin(arg);
          sc[h] = std::cos(arg);
        }
      }
      // head: backward of the linear part from the scalar output to the first-layer output.
      g.assign(1, 1.0);
      for (int l = n_m - 1; l >= 1; --l) {
        auto W = params.weight(l);
        g_z.assign(static_cast<std::size_t>(W.cols()), 0.0);
        for (Eigen::Index r = 0; r < W.rows(); ++r)
          for (Eigen::Index k = 0; k < W.cols(); ++k) g_z[static_cast<std::size_t>(k)] += W(r, k) * g[static_cast<std::size_t>(r)];
        const double* s = filter(j, l - 1);
        for (std::size_t h = 0; h < g_z.size(); ++h) g_z[h] *= s[h];
        g.swap(g_z);
      }
      std::copy(g.begin(), g.end(), heads_.begin() + static_cast<std::ptrdiff_t>(j * hw));
      // offset: the chain evaluated with a zero first-layer output.
      a.assign(hw, 0.0);
      for (int l = 1; l < n_m; ++l) {
        auto W = params.weight(l);
        auto b = params.bias(l);
        const double* s = filter(j, l - 1);
        z.resize(a.size());
        for (std::size_t h = 0; h < a.size(); ++h) z[h] = a[h] * s[h];
        a.assign(static_cast<std::size_t>(W.rows()), 0.0);
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
          double acc = b(r);
          for (Eigen::Index k = 0; k < W.cols(); ++k) acc += W(r, k) * z[static_cast<std::size_t>(k)];
          a[static_cast<std::size_t>(r)] = acc;
        }
      }
      offsets_[j] = n_m == 1 ? 0.0 : a[0];
    }
  }
}

void MulFANodeTable::head_input(std::span<const double> z, std::span<double> a) const {
  auto W = params_->weight(0);
  auto b = params_->bias(0);
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    double acc = b(r);
    const double* wr = W.data() + r * W.cols();
    for (Eigen::Index k = 0; k < W.cols(); ++k) acc += wr[k] * z[static_cast<std::size_t>(k)];
    a[static_cast<std::size_t>(r)] = acc;
  }
}

double MulFANodeTable::raw(std::size_t node, std::span<const double> a) const {
  const double* u = heads_.data() + node * static_cast<std::size_t>(head_width_);
  double acc = offsets_[node];
  for (int h = 0; h < head_width_; ++h) acc += u[h] * a[static_cast<std::size_t>(h)];
  return acc;
}

void MulFANodeTable::accumulate_node_grad(std::size_t node, std::span<const double> A, double U,
                                          MulFAParams& grad) const {
  const int n_m = params_->shape().n_m;
  if (n_m == 1) return;
  const auto dim = static_cast<std::size_t>(geometry_->dim());
  std::vector<double> c(dim);
  geometry_->node_unit_center(node, c);

  // Forward with input A and biases scaled by U; keep layer inputs/outputs.
  std::vector<std::vector<double>> outs;  // outs[l]: output of layer l (l = 0 is A)
  std::vector<std::vector<double>> ins;   // ins[l]: input of layer l (l >= 1)
  outs.emplace_back(A.begin(), A.end());
  ins.emplace_back();
  for (int l = 1; l < n_m; ++l) {
    auto W = params_->weight(l);
    auto b = params_->bias(l);
    const double* s = filter(node, l - 1);
    const auto& prev = outs.back();
    std::vector<double> z(prev.size());
    for (std::size_t h = 0; h < z.size(); ++h) z[h] = prev[h] * s[h];
    std::vector<double> a(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      double acc = U * b(r);
      for (Eigen::Index k = 0; k < W.cols(); ++k) acc += W(r, k) * z[static_cast<std::size_t>(k)];
      a[static_cast<std::size_t>(r)] = acc;
    }
    ins.push_back(std::move(z));
    outs.push_back(std::move(a));
  }

  std::vector<double> g(1, 1.0);
  std::vector<double> g_z;
  for (int l = n_m - 1; l >= 1; --l) {
    auto W = params_->weight(l);
    auto gW = grad.weight(l);
    auto gb = grad.bias(l);
    const auto& z = ins[static_cast<std::size_t>(l)];
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      const double gr = g[static_cast<std::size_t>(r)];
      for (Eigen::Index k = 0; k < W.cols(); ++k) gW(r, k) += gr * z[static_cast<std::size_t>(k)];
      gb(r) += U * gr;
    }
    g_z.assign(static_cast<std::size_t>(W.cols()), 0.0);
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index k = 0; k < W.cols(); ++k) g_z[static_cast<std::size_t>(k)] += W(r, k) * g[static_cast<std::size_t>(r)];
    const int f = l - 1;
    const double* s = filter(node, f);
    const double* sc = filter_cos(node, f);
    const auto& a_prev = outs[static_cast<std::size_t>(l - 1)];
    auto gO = grad.omega(f);
    auto gP = grad.phase(f);
    for (std::size_t h = 0; h < d_h_; ++h) {
      const double g_arg = g_z[h] * a_prev[h] * sc[h];
      for (std::size_t a_ = 0; a_ < dim; ++a_) gO(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(a_)) += g_arg * c[a_];
      gP(static_cast<Eigen::Index>(h)) += g_arg;
      g_z[h] *= s[h];
    }
    g.swap(g_z);
  }
}

void MulFANodeTable::accumulate_head_grad(std::span<const double> z, std::span<const double> g,
                                          MulFAParams& grad) const {
  auto gW = grad.weight(0);
  auto gb = grad.bias(0);
  for (Eigen::Index r = 0; r < gW.rows(); ++r) {
    const double gr = g[static_cast<std::size_t>(r)];
    if (gr == 0.0) continue;
    double* row = gW.data() + r * gW.cols();
    for (Eigen::Index k = 0; k < gW.cols(); ++k) row[k] += gr * z[static_cast<std::size_t>(k)];
    gb(r) += gr;
  }
}

}  // namespace mfgrid
