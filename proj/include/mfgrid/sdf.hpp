#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "mfgrid/model.hpp"

namespace mfgrid {

struct Circle {
  std::array<double, 2> center{0.5, 0.5};
  double radius = 0.25;
};
struct Box {
  std::vector<double> center{0.5, 0.5};  ///< 2 or 3 entries
  std::vector<double> half_extents{0.25, 0.25};
};
struct Sphere {
  std::array<double, 3> center{0.5, 0.5, 0.5};
  double radius = 0.3;
};
struct Torus {
  std::array<double, 3> center{0.5, 0.5, 0.5};
  double major_radius = 0.25;
  double minor_radius = 0.1;
};

using Shape = std::variant<Circle, Box, Sphere, Torus>;

int shape_dim(const Shape& shape);
/// Positive radii/extents and the shape contained in the unit box.
void validate_shape(const Shape& shape);

/// Exact signed distance, negative inside.
double analytic_sdf(const Shape& shape, Point x);

using ScalarField = std::function<double(Point)>;

/// Deterministic points on the zero level set.
RowMatrix surface_samples(const Shape& shape, std::size_t count, std::uint64_t seed = 0);

struct IouResult {
  double iou = 1.0;
  bool empty_shape = false;  ///< neither field had an inside cell
};

/// Inside = value <= 0, compared on the cell centers of a resolution^D grid over the unit box.
IouResult iou_metric(const std::vector<double>& predicted, const std::vector<double>& reference);
IouResult iou_metric(const ScalarField& predicted, const Shape& shape, int resolution);
IouResult iou_metric(const GridModel& model, const Shape& shape, int resolution);

/// Cell centers of a resolution^D grid over the unit box (axis 0 slowest).
RowMatrix evaluation_grid(int dim, int resolution);

struct NaeResult {
  double degrees = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  ///< samples with a zero predicted gradient
};

/// Mean angle between central-difference normals of the predicted field
/// (step `step`) and the analytic normals, over surface samples.
NaeResult nae_metric(const ScalarField& predicted, const Shape& shape, std::size_t surface_count, double step);
/// Model variant: step is half a grid cell.
NaeResult nae_metric(const GridModel& model, const Shape& shape, std::size_t surface_count);

}  // namespace mfgrid
