#include "mfgrid/gtk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfgrid/errors.hpp"
#include "mfgrid/training.hpp"

namespace mfgrid {

void GtkMatrix::decompose() const {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(g_);
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
}

const Vector& GtkMatrix::eigenvalues() const {
  if (!eigenvalues_) decompose();
  return *eigenvalues_;
}

const Matrix& GtkMatrix::eigenvectors() const {
  if (!eigenvectors_) decompose();
  return *eigenvectors_;
}

double GtkMatrix::symmetry_residual() const { return (g_ - g_.transpose()).cwiseAbs().maxCoeff(); }

double GtkMatrix::psd_residual() const { return std::max(0.0, -lambda_min()); }

Matrix gradient_matrix(const GridModel& model, const RowMatrix& points) {
  const auto m = static_cast<Eigen::Index>(model.geometry().node_count());
  Matrix z = Matrix::Zero(m, points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto g = grad_wrt_features(model, row_of(points, i));
    for (std::size_t k = 0; k < g.indices.size(); ++k) z(static_cast<Eigen::Index>(g.indices[k]), i) = g.values[k];
  }
  return z;
}

Matrix gtk_from_weights(const SampleStencil& stencil, const RowMatrix& weights) {
  const auto n = stencil.size();
  const auto width = static_cast<std::size_t>(stencil.width());
  // Per-sample (index, weight) pairs sorted by node index for the merge below.
  std::vector<std::size_t> idx(n * width);
  std::vector<double> val(n * width);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t is = 0; is < static_cast<std::ptrdiff_t>(n); ++is) {
    const auto i = static_cast<std::size_t>(is);
    const auto src = stencil.indices(i);
    std::vector<std::size_t> order(width);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return src[a] < src[b]; });
    for (std::size_t k = 0; k < width; ++k) {
      idx[i * width + k] = src[order[k]];
      val[i * width + k] = weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(order[k]));
    }
  }
  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t is = 0; is < static_cast<std::ptrdiff_t>(n); ++is) {
    const auto i = static_cast<std::size_t>(is);
    const std::size_t* ia = idx.data() + i * width;
    const double* va = val.data() + i * width;
    for (std::size_t j = i; j < n; ++j) {
      const std::size_t* ib = idx.data() + j * width;
      const double* vb = val.data() + j * width;
      double acc = 0.0;
      std::size_t p = 0, q = 0;
      while (p < width && q < width) {
        if (ia[p] < ib[q]) {
          ++p;
        } else if (ib[q] < ia[p]) {
          ++q;
        } else {
          acc += va[p] * vb[q];
          ++p;
          ++q;
        }
      }
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
      g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = acc;
    }
  }
  return g;
}

namespace {

std::string provenance_of(const GridModel& model, const RowMatrix& points) {
  // FNV-1a over the raw bytes of the inputs and kernel parameters.
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  mix(points.data(), static_cast<std::size_t>(points.size()) * sizeof(double));
  const std::size_t variant = model.kernel().index();
  mix(&variant, sizeof(variant));
  if (const auto* p = model.kernel_params()) mix(p->values().data(), p->size() * sizeof(double));
  if (const auto* rbf = std::get_if<GaussianRbf>(&model.kernel())) mix(&rbf->sigma, sizeof(double));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

GtkMatrix gtk_compute(const GridModel& model, const RowMatrix& points) {
  if (points.rows() < 1) throw PreconditionError("gtk_compute requires at least one point");
  const SampleStencil stencil(model, points);
  const auto w = compute_weights(model, stencil);
  return {gtk_from_weights(stencil, w.weights), provenance_of(model, points)};
}

GtkMatrix gtk_compute_reference(const GridModel& model, const RowMatrix& points) {
  if (points.rows() < 1) throw PreconditionError("gtk_compute requires at least one point");
  const Matrix z = gradient_matrix(model, points);
  const auto n = z.cols();
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < z.rows(); ++r) acc += z(r, i) * z(r, j);
      g(i, j) = acc;
    }
  }
  return {std::move(g), provenance_of(model, points)};
}

ClosedFormResult closed_form_outputs(const GtkMatrix& g, const RowMatrix& targets, double eta, std::size_t steps) {
  if (targets.rows() != g.size()) throw PreconditionError("closed_form_outputs: target count does not match GTK size");
  const Vector& lambda = g.eigenvalues();
  const Matrix& v = g.eigenvectors();
  ClosedFormResult out;
  Vector decay(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const double factor = 1.0 - eta * lambda(k);
    out.spectral_radius = std::max(out.spectral_radius, std::abs(factor));
    decay(k) = std::pow(factor, static_cast<double>(steps));
  }
  out.divergent = out.spectral_radius > 1.0;
  const Matrix projected = v.transpose() * targets;
  const Matrix residual = v * (decay.asDiagonal() * projected);
  out.outputs = targets - RowMatrix(residual);
  return out;
}

RowMatrix closed_form_outputs_iterated(const GtkMatrix& g, const RowMatrix& targets, double eta, std::size_t steps) {
  Matrix residual = targets;  // (I - eta G)^t Y
  for (std::size_t t = 0; t < steps; ++t) residual -= eta * (g.matrix() * residual);
  return targets - RowMatrix(residual);
}

DeltaSolver::DeltaSolver(const GtkMatrix& g, double ridge) {
  if (ridge < 0.0) throw PreconditionError("generalization_delta: ridge must be non-negative");
  const Vector& lambda = g.eigenvalues();
  report_.ridge = ridge;
  report_.lambda_min = lambda(0);
  const double lmax = lambda(lambda.size() - 1);
  report_.condition_number = lambda(0) > 0.0 ? lmax / lambda(0) : std::numeric_limits<double>::infinity();
  report_.ill_conditioned = lambda(0) < kLambdaMinFlag;
  eigenvalues_ = lambda;
  eigenvectors_ = g.eigenvectors();
}

double DeltaSolver::delta(const Vector& y) const {
  // Sum of (v_k . y)^2 / (lambda_k + ridge): non-negative and even in y term by term.
  const Vector proj = eigenvectors_.transpose() * y;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < proj.size(); ++k) {
    const double denom = eigenvalues_(k) + report_.ridge;
    const double num = proj(k) * proj(k);
    if (denom <= 0.0) {
      if (num != 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    acc += num / denom;
  }
  return acc;
}

BoundReport generalization_delta(const GtkMatrix& g, const RowMatrix& targets, double ridge) {
  if (targets.rows() != g.size()) throw PreconditionError("generalization_delta: target count does not match GTK size");
  const DeltaSolver solver(g, ridge);
  BoundReport report = solver.report();
  for (Eigen::Index c = 0; c < targets.cols(); ++c) report.delta += solver.delta(targets.col(c));
  return report;
}

std::vector<double> symmetric_linspace(double lo, double hi, std::size_t count) {
  std::vector<double> v(count);
  if (count == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  const auto last = static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) {
    const auto kd = static_cast<double>(k);
    v[k] = (lo * (last - kd) + hi * kd) / last;
  }
  return v;
}

BoundMap bound_difference_map(const GridModel& model_a, const GridModel& model_b, const RowMatrix& points,
                              double y_lo, double y_hi, std::size_t resolution, double ridge) {
  if (resolution < 2) throw PreconditionError("bound_difference_map: resolution must be >= 2");
  if (points.rows() != 2) throw PreconditionError("bound_difference_map: exactly two fixed points are required");
  if (model_a.dim() != model_b.dim()) throw PreconditionError("bound_difference_map: models must share the domain dimension");
  const DeltaSolver sa(gtk_compute(model_a, points), ridge);
  const DeltaSolver sb(gtk_compute(model_b, points), ridge);
  BoundMap map;
  map.resolution = resolution;
  map.y_lo = y_lo;
  map.y_hi = y_hi;
  map.y_values = symmetric_linspace(y_lo, y_hi, resolution);
  map.points = points;
  map.ill_conditioned_a = sa.report().ill_conditioned;
  map.ill_conditioned_b = sb.report().ill_conditioned;
  const std::size_t cells = resolution * resolution;
  map.delta_a.resize(cells);
  map.delta_b.resize(cells);
  map.difference.resize(cells);
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      Vector y(2);
      y << map.y_values[r], map.y_values[c];
      const std::size_t k = r * resolution + c;
      map.delta_a[k] = sa.delta(y);
      map.delta_b[k] = sb.delta(y);
      map.difference[k] = map.delta_a[k] - map.delta_b[k];
    }
  }
  return map;
}

WeightBoundCheck weight_change_bound_check(const TrainHistory& history, const GtkMatrix& g, const RowMatrix& targets) {
  if (history.kernel_mutated)
    throw PreconditionError("weight_change_bound_check requires feature-only training (kernel parameters changed)");
  if (g.lambda_min() <= kLambdaMinFlag)
    throw PreconditionError("weight_change_bound_check requires lambda_min(G) > 1e-6");
  const auto report = generalization_delta(g, targets, 0.0);
  WeightBoundCheck out;
  out.bound = std::sqrt(report.delta);
  out.worst_margin = std::numeric_limits<double>::infinity();
  out.holds = true;
  for (const auto& snap : history.snapshots) {
    const double margin = out.bound - snap.weight_change;
    out.worst_margin = std::min(out.worst_margin, margin);
    if (snap.weight_change > out.bound + 1e-6) out.holds = false;
  }
  return out;
}

}  // namespace mfgrid
