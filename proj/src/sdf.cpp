#include "mfgrid/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mfgrid/batch.hpp"
#include "mfgrid/errors.hpp"

namespace mfgrid {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}

double box_sdf(const Box& b, Point x) {
  double outside = 0.0;
  double inside = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < b.center.size(); ++a) {
    const double q = std::abs(x[a] - b.center[a]) - b.half_extents[a];
    outside += std::max(q, 0.0) * std::max(q, 0.0);
    inside = std::max(inside, q);
  }
  return std::sqrt(outside) + std::min(inside, 0.0);
}

void analytic_normal(const Shape& shape, Point x, std::span<double> out) {
  const double h = 1e-6;
  std::vector<double> p(x.begin(), x.end());
  double norm = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    const double orig = p[a];
    p[a] = orig + h;
    const double up = analytic_sdf(shape, p);
    p[a] = orig - h;
    const double down = analytic_sdf(shape, p);
    p[a] = orig;
    out[a] = (up - down) / (2 * h);
    norm += out[a] * out[a];
  }
  norm = std::sqrt(norm);
  for (auto& v : out) v /= norm;
}

}  // namespace

int shape_dim(const Shape& shape) {
  return std::visit(Overloaded{[](const Circle&) { return 2; }, [](const Box& b) { return static_cast<int>(b.center.size()); },
                               [](const Sphere&) { return 3; }, [](const Torus&) { return 3; }},
                    shape);
}

void validate_shape(const Shape& shape) {
  const auto inside_unit = [](double c, double r) { return c - r >= 0.0 && c + r <= 1.0; };
  std::visit(Overloaded{[&](const Circle& c) {
                          require(c.radius > 0.0, "task.shape: circle radius must be positive");
                          require(inside_unit(c.center[0], c.radius) && inside_unit(c.center[1], c.radius),
                                  "task.shape: circle must fit inside the unit square");
                        },
                        [&](const Box& b) {
                          require(b.center.size() == 2 || b.center.size() == 3, "task.shape: box must be 2D or 3D");
                          require(b.half_extents.size() == b.center.size(), "task.shape: box half_extents dimension mismatch");
                          for (std::size_t a = 0; a < b.center.size(); ++a) {
                            require(b.half_extents[a] > 0.0, "task.shape: box half extents must be positive");
                            require(inside_unit(b.center[a], b.half_extents[a]), "task.shape: box must fit inside the unit cube");
                          }
                        },
                        [&](const Sphere& s) {
                          require(s.radius > 0.0, "task.shape: sphere radius must be positive");
                          for (double c : s.center) require(inside_unit(c, s.radius), "task.shape: sphere must fit inside the unit cube");
                        },
                        [&](const Torus& t) {
                          require(t.major_radius > 0.0 && t.minor_radius > 0.0, "task.shape: torus radii must be positive");
                          require(t.minor_radius < t.major_radius, "task.shape: torus minor radius must be below the major radius");
                          const double reach = t.major_radius + t.minor_radius;
                          require(inside_unit(t.center[0], reach) && inside_unit(t.center[1], reach) &&
                                      inside_unit(t.center[2], t.minor_radius),
                                  "task.shape: torus must fit inside the unit cube");
                        }},
             shape);
}

double analytic_sdf(const Shape& shape, Point x) {
  return std::visit(
      Overloaded{[&](const Circle& c) { return std::hypot(x[0] - c.center[0], x[1] - c.center[1]) - c.radius; },
                 [&](const Box& b) { return box_sdf(b, x); },
                 [&](const Sphere& s) {
                   return std::sqrt((x[0] - s.center[0]) * (x[0] - s.center[0]) + (x[1] - s.center[1]) * (x[1] - s.center[1]) +
                                    (x[2] - s.center[2]) * (x[2] - s.center[2])) -
                          s.radius;
                 },
                 [&](const Torus& t) {
                   const double ring = std::hypot(x[0] - t.center[0], x[1] - t.center[1]) - t.major_radius;
                   return std::hypot(ring, x[2] - t.center[2]) - t.minor_radius;
                 }},
      shape);
}

RowMatrix surface_samples(const Shape& shape, std::size_t count, std::uint64_t seed) {
  const int dim = shape_dim(shape);
  RowMatrix out(static_cast<Eigen::Index>(count), dim);
  if (const auto* c = std::get_if<Circle>(&shape)) {
    for (std::size_t k = 0; k < count; ++k) {
      // Half-step offset keeps samples off the axis-aligned extremes.
      const double theta = 2.0 * std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
      out(static_cast<Eigen::Index>(k), 0) = c->center[0] + c->radius * std::cos(theta);
      out(static_cast<Eigen::Index>(k), 1) = c->center[1] + c->radius * std::sin(theta);
    }
    return out;
  }
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < count; ++k) {
      const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(k);
      out(static_cast<Eigen::Index>(k), 0) = s->center[0] + s->radius * r * std::cos(phi);
      out(static_cast<Eigen::Index>(k), 1) = s->center[1] + s->radius * r * std::sin(phi);
      out(static_cast<Eigen::Index>(k), 2) = s->center[2] + s->radius * z;
    }
    return out;
  }
  // General shapes: project uniform points onto the surface along the SDF gradient.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(dim)), n(static_cast<std::size_t>(dim));
  for (std::size_t k = 0; k < count; ++k) {
    for (auto& v : p) v = u(rng);
    for (int iter = 0; iter < 8; ++iter) {
      const double d = analytic_sdf(shape, p);
      if (std::abs(d) < 1e-13) break;
      analytic_normal(shape, p, n);
      for (std::size_t a = 0; a < p.size(); ++a) p[a] -= d * n[a];
    }
    for (int a = 0; a < dim; ++a) out(static_cast<Eigen::Index>(k), a) = p[static_cast<std::size_t>(a)];
  }
  return out;
}

RowMatrix evaluation_grid(int dim, int resolution) {
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(resolution);
  RowMatrix pts(static_cast<Eigen::Index>(total), dim);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rest = k;
    for (int a = dim - 1; a >= 0; --a) {
      pts(static_cast<Eigen::Index>(k), a) = (static_cast<double>(rest % static_cast<std::size_t>(resolution)) + 0.5) / resolution;
      rest /= static_cast<std::size_t>(resolution);
    }
  }
  return pts;
}

IouResult iou_metric(const std::vector<double>& predicted, const std::vector<double>& reference) {
  std::size_t both = 0, either = 0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const bool a = predicted[k] <= 0.0;
    const bool b = reference[k] <= 0.0;
    both += a && b;
    either += a || b;
  }
  if (either == 0) return {1.0, true};
  return {static_cast<double>(both) / static_cast<double>(either), false};
}

IouResult iou_metric(const ScalarField& predicted, const Shape& shape, int resolution) {
  const RowMatrix pts = evaluation_grid(shape_dim(shape), resolution);
  std::vector<double> pred(static_cast<std::size_t>(pts.rows())), ref(pred.size());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    pred[static_cast<std::size_t>(i)] = predicted(row_of(pts, i));
    ref[static_cast<std::size_t>(i)] = analytic_sdf(shape, row_of(pts, i));
  }
  return iou_metric(pred, ref);
}

IouResult iou_metric(const GridModel& model, const Shape& shape, int resolution) {
  const RowMatrix pts = evaluation_grid(shape_dim(shape), resolution);
  const RowMatrix out = evaluate(model, pts);
  std::vector<double> pred(static_cast<std::size_t>(pts.rows())), ref(pred.size());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    pred[static_cast<std::size_t>(i)] = out(i, 0);
    ref[static_cast<std::size_t>(i)] = analytic_sdf(shape, row_of(pts, i));
  }
  return iou_metric(pred, ref);
}

namespace {

NaeResult nae_from_values(const Shape& shape, const RowMatrix& surface, const std::vector<double>& plus,
                          const std::vector<double>& minus) {
  const auto dim = static_cast<std::size_t>(surface.cols());
  NaeResult result;
  double total = 0.0;
  std::vector<double> truth(dim), pred(dim);
  for (Eigen::Index k = 0; k < surface.rows(); ++k) {
    double norm = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      pred[a] = plus[static_cast<std::size_t>(k) * dim + a] - minus[static_cast<std::size_t>(k) * dim + a];
      norm += pred[a] * pred[a];
    }
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      ++result.excluded;
      continue;
    }
    norm = std::sqrt(norm);
    analytic_normal(shape, row_of(surface, k), truth);
    double dot = 0.0;
    for (std::size_t a = 0; a < dim; ++a) dot += pred[a] / norm * truth[a];
    total += std::acos(std::clamp(dot, -1.0, 1.0));
    ++result.used;
  }
  result.degrees = result.used ? total / static_cast<double>(result.used) * 180.0 / std::numbers::pi : 0.0;
  return result;
}

}  // namespace

NaeResult nae_metric(const ScalarField& predicted, const Shape& shape, std::size_t surface_count, double step) {
  const RowMatrix surface = surface_samples(shape, surface_count);
  const auto dim = static_cast<std::size_t>(surface.cols());
  std::vector<double> plus(surface_count * dim), minus(surface_count * dim), p(dim);
  for (Eigen::Index k = 0; k < surface.rows(); ++k) {
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) p[b] = surface(k, static_cast<Eigen::Index>(b));
      p[a] += step;
      plus[static_cast<std::size_t>(k) * dim + a] = predicted(p);
      p[a] -= 2 * step;
      minus[static_cast<std::size_t>(k) * dim + a] = predicted(p);
    }
  }
  return nae_from_values(shape, surface, plus, minus);
}

NaeResult nae_metric(const GridModel& model, const Shape& shape, std::size_t surface_count) {
  const auto& geometry = model.geometry();
  double step;
  if (geometry.kind() == GridKind::Regular) {
    step = geometry.cell_width(0);
    for (int a = 1; a < geometry.dim(); ++a) step = std::min(step, geometry.cell_width(a));
    step *= 0.5;
  } else {
    step = 0.5 * default_rbf_sigma(geometry);
  }
  const RowMatrix surface = surface_samples(shape, surface_count);
  const auto dim = surface.cols();
  RowMatrix probes(surface.rows() * dim * 2, dim);
  for (Eigen::Index k = 0; k < surface.rows(); ++k) {
    for (Eigen::Index a = 0; a < dim; ++a) {
      const Eigen::Index row = (k * dim + a) * 2;
      probes.row(row) = surface.row(k);
      probes.row(row + 1) = surface.row(k);
      probes(row, a) += step;
      probes(row + 1, a) -= step;
    }
  }
  const RowMatrix values = evaluate(model, probes);
  std::vector<double> plus(static_cast<std::size_t>(surface.rows() * dim)), minus(plus.size());
  for (std::size_t j = 0; j < plus.size(); ++j) {
    plus[j] = values(static_cast<Eigen::Index>(2 * j), 0);
    minus[j] = values(static_cast<Eigen::Index>(2 * j + 1), 0);
  }
  return nae_from_values(shape, surface, plus, minus);
}

}  // namespace mfgrid
