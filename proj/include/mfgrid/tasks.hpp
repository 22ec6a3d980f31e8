#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfgrid/model_config.hpp"
#include "mfgrid/netpbm.hpp"
#include "mfgrid/sdf.hpp"
#include "mfgrid/training.hpp"

namespace mfgrid {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Metrics {
  std::size_t step = 0;
  double psnr = kNaN;          ///< train pixels
  double psnr_holdout = kNaN;  ///< held-out pixels
  double iou = kNaN;
  double nae = kNaN;  ///< degrees
};

/// -10 log10(MSE) over all entries; +inf for identical inputs.
double psnr(const RowMatrix& predicted, const RowMatrix& reference);
double psnr_from_mse(double mse);

struct ImageTask {
  Image image;
  /// Hold out pixels with odd row and odd column (a quarter of the image).
  bool holdout = true;
};

void validate_image(const Image& image);

/// Pixel (r, c) -> ((r + 0.5) / H, (c + 0.5) / W).
RowMatrix pixel_coordinates(int height, int width);
bool is_holdout_pixel(int r, int c);

struct ImageSplit {
  Dataset train;
  Dataset holdout;  ///< empty when the task has no hold-out
};
ImageSplit image_split(const ImageTask& task);

struct SdfTask {
  Shape shape = Circle{};
  std::size_t samples = 4096;  ///< half uniform in the unit box, half near the surface
  double surface_band = 0.02;  ///< std. dev. of the normal offset of surface-biased samples
  int eval_resolution = 64;
  std::size_t surface_samples = 512;  ///< NAE sample count
};

void validate_sdf_task(const SdfTask& task);
Dataset sdf_dataset(const SdfTask& task, std::uint64_t seed);

struct FitResult {
  GridModel model;
  TrainHistory history;
  std::vector<Metrics> metrics;  ///< one per snapshot
  Metrics final_metrics;
  bool empty_shape = false;
  std::size_t nae_excluded = 0;
};

FitResult fit_image(const ImageTask& task, const ModelConfig& model_config, const TrainConfig& train_config);
FitResult fit_sdf(const SdfTask& task, const ModelConfig& model_config, const TrainConfig& train_config);

/// Model sampled on a dense grid and encoded for disk.
struct ExportedField {
  std::string extension;  ///< "pgm", "ppm" or "csv"
  std::string contents;
  std::string sidecar_json;  ///< PGM value mapping; empty otherwise
  std::vector<double> values;  ///< raw samples, row-major (axis 0 slowest), channels interleaved
};

/// 2D scalar fields are mapped affinely from [lo, hi] to [0, 1] (min/max of
/// the samples unless `range` is given); 2D three-channel fields are written
/// as PPM unchanged; 3D scalar fields become x,y,z,value CSV rows.
ExportedField export_field(const GridModel& model, int resolution,
                           std::optional<std::pair<double, double>> range = std::nullopt);
ExportedField export_field(const ScalarField& field, int dim, int resolution,
                           std::optional<std::pair<double, double>> range = std::nullopt);

}  // namespace mfgrid
