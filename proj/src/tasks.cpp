#include "mfgrid/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "mfgrid/batch.hpp"
#include "mfgrid/csv.hpp"
#include "mfgrid/errors.hpp"

namespace mfgrid {

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double psnr(const RowMatrix& predicted, const RowMatrix& reference) {
  if (predicted.rows() != reference.rows() || predicted.cols() != reference.cols())
    throw PreconditionError("psnr: shape mismatch");
  if (predicted.size() == 0) throw PreconditionError("psnr: empty input");
  return psnr_from_mse((predicted - reference).squaredNorm() / static_cast<double>(predicted.size()));
}

void validate_image(const Image& image) {
  if (image.height < 2 || image.width < 2) throw ConfigError("task.image: image must be at least 2x2");
  if (image.channels != 1 && image.channels != 3) throw ConfigError("task.image: image must have 1 or 3 channels");
  for (double v : image.data)
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("task.image: pixel values must lie in [0,1]");
}

RowMatrix pixel_coordinates(int height, int width) {
  RowMatrix pts(static_cast<Eigen::Index>(height) * width, 2);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const Eigen::Index k = static_cast<Eigen::Index>(r) * width + c;
      pts(k, 0) = (r + 0.5) / height;
      pts(k, 1) = (c + 0.5) / width;
    }
  return pts;
}

bool is_holdout_pixel(int r, int c) { return r % 2 == 1 && c % 2 == 1; }

ImageSplit image_split(const ImageTask& task) {
  const Image& img = task.image;
  validate_image(img);
  std::vector<std::pair<int, int>> train_px, hold_px;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) (task.holdout && is_holdout_pixel(r, c) ? hold_px : train_px).emplace_back(r, c);
  const auto fill = [&](const std::vector<std::pair<int, int>>& px) {
    Dataset d{RowMatrix(static_cast<Eigen::Index>(px.size()), 2),
              RowMatrix(static_cast<Eigen::Index>(px.size()), img.channels)};
    for (std::size_t k = 0; k < px.size(); ++k) {
      const auto [r, c] = px[k];
      const auto row = static_cast<Eigen::Index>(k);
      d.points(row, 0) = (r + 0.5) / img.height;
      d.points(row, 1) = (c + 0.5) / img.width;
      for (int ch = 0; ch < img.channels; ++ch) d.targets(row, ch) = img.at(r, c, ch);
    }
    return d;
  };
  return {fill(train_px), fill(hold_px)};
}

void validate_sdf_task(const SdfTask& task) {
  validate_shape(task.shape);
  if (task.samples < 2) throw ConfigError("task.samples must be >= 2");
  if (!(task.surface_band >= 0.0)) throw ConfigError("task.surface_band must be >= 0");
  if (task.eval_resolution < 2) throw ConfigError("task.eval_resolution must be >= 2");
  if (task.surface_samples < 1) throw ConfigError("task.surface_samples must be >= 1");
}

Dataset sdf_dataset(const SdfTask& task, std::uint64_t seed) {
  validate_sdf_task(task);
  const int dim = shape_dim(task.shape);
  const std::size_t near = task.samples / 2;
  const std::size_t volume = task.samples - near;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, task.surface_band);

  Dataset d{RowMatrix(static_cast<Eigen::Index>(task.samples), dim), RowMatrix(static_cast<Eigen::Index>(task.samples), 1)};
  for (std::size_t k = 0; k < volume; ++k)
    for (int a = 0; a < dim; ++a) d.points(static_cast<Eigen::Index>(k), a) = uniform(rng);
  const RowMatrix surface = surface_samples(task.shape, near, seed);
  for (std::size_t k = 0; k < near; ++k)
    for (int a = 0; a < dim; ++a) {
      const double v = surface(static_cast<Eigen::Index>(k), a) + (task.surface_band > 0.0 ? jitter(rng) : 0.0);
      d.points(static_cast<Eigen::Index>(volume + k), a) = std::clamp(v, 0.0, 1.0);
    }
  for (Eigen::Index i = 0; i < d.points.rows(); ++i) d.targets(i, 0) = analytic_sdf(task.shape, row_of(d.points, i));
  return d;
}

namespace {

double mse_of_loss(double loss, const Dataset& data) {
  return 2.0 * loss / static_cast<double>(data.targets.size());
}

}  // namespace

FitResult fit_image(const ImageTask& task, const ModelConfig& model_config, const TrainConfig& train_config) {
  const ImageSplit split = image_split(task);
  GridModel model = build_model(model_config, 2, task.image.channels, train_config.seed);
  std::vector<Metrics> metrics;
  const auto record = [&](const GridModel& m, const Snapshot& s) {
    Metrics row;
    row.step = s.step;
    row.psnr = psnr_from_mse(mse_of_loss(s.loss, split.train));
    if (split.holdout.points.rows() > 0) row.psnr_holdout = psnr(evaluate(m, split.holdout.points), split.holdout.targets);
    metrics.push_back(row);
  };
  TrainResult trained = train(std::move(model), split.train, train_config, record);
  FitResult out{std::move(trained.model), std::move(trained.history), std::move(metrics), {}};
  out.final_metrics = out.metrics.back();
  return out;
}

FitResult fit_sdf(const SdfTask& task, const ModelConfig& model_config, const TrainConfig& train_config) {
  const Dataset data = sdf_dataset(task, train_config.seed);
  const int dim = shape_dim(task.shape);
  GridModel model = build_model(model_config, dim, 1, train_config.seed);
  std::vector<Metrics> metrics;
  bool empty = false;
  std::size_t excluded = 0;
  const auto record = [&](const GridModel& m, const Snapshot& s) {
    Metrics row;
    row.step = s.step;
    const auto iou = iou_metric(m, task.shape, task.eval_resolution);
    const auto nae = nae_metric(m, task.shape, task.surface_samples);
    row.iou = iou.iou;
    row.nae = nae.degrees;
    empty = iou.empty_shape;
    excluded = nae.excluded;
    metrics.push_back(row);
  };
  TrainResult trained = train(std::move(model), data, train_config, record);
  FitResult out{std::move(trained.model), std::move(trained.history), std::move(metrics), {}};
  out.final_metrics = out.metrics.back();
  out.empty_shape = empty;
  out.nae_excluded = excluded;
  return out;
}

namespace {

RowMatrix dense_grid(const std::vector<Interval>& bounds, int resolution) {
  const int dim = static_cast<int>(bounds.size());
  RowMatrix pts = evaluation_grid(dim, resolution);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (int a = 0; a < dim; ++a) pts(i, a) = bounds[a].lo + pts(i, a) * (bounds[a].hi - bounds[a].lo);
  return pts;
}

ExportedField encode_field(const RowMatrix& pts, const RowMatrix& values, int resolution,
                           std::optional<std::pair<double, double>> range) {
  const auto dim = pts.cols();
  const auto channels = values.cols();
  ExportedField out;
  out.values.assign(values.data(), values.data() + values.size());
  if (dim == 2 && channels == 1) {
    double lo, hi;
    if (range) {
      std::tie(lo, hi) = *range;
      if (!(hi > lo)) throw ConfigError("export range must satisfy lo < hi");
    } else {
      lo = values.minCoeff();
      hi = values.maxCoeff();
    }
    Image img{resolution, resolution, 1, std::vector<double>(static_cast<std::size_t>(values.size()))};
    // Spreads at rounding level are treated as a constant field.
    const double span = hi - lo > 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)}) ? hi - lo : 0.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      img.data[static_cast<std::size_t>(i)] = span > 0.0 ? std::clamp((values(i, 0) - lo) / span, 0.0, 1.0) : 0.0;
    out.extension = "pgm";
    out.contents = encode_netpbm(img);
    nlohmann::ordered_json side;
    side["format"] = "pgm";
    side["resolution"] = resolution;
    side["lo"] = lo;
    side["hi"] = hi;
    side["mapping"] = "value = lo + (hi - lo) * pixel / 255";
    out.sidecar_json = side.dump(2) + "\n";
    return out;
  }
  if (dim == 2 && channels == 3) {
    Image img{resolution, resolution, 3, out.values};
    for (auto& v : img.data) v = std::clamp(v, 0.0, 1.0);
    out.extension = "ppm";
    out.contents = encode_netpbm(img);
    return out;
  }
  static const char* const axis_names[] = {"x", "y", "z"};
  out.extension = "csv";
  for (Eigen::Index a = 0; a < dim; ++a) out.contents += std::string(a < 3 ? axis_names[a] : "x" + std::to_string(a)) + ',';
  for (Eigen::Index c = 0; c < channels; ++c)
    out.contents += (channels == 1 ? std::string("value") : "value" + std::to_string(c)) + (c + 1 < channels ? "," : "\n");
  std::vector<double> row(static_cast<std::size_t>(dim + channels));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index a = 0; a < dim; ++a) row[static_cast<std::size_t>(a)] = pts(i, a);
    for (Eigen::Index c = 0; c < channels; ++c) row[static_cast<std::size_t>(dim + c)] = values(i, c);
    out.contents += csv_row(row);
  }
  return out;
}

}  // namespace

ExportedField export_field(const GridModel& model, int resolution, std::optional<std::pair<double, double>> range) {
  if (resolution < 2) throw ConfigError("export resolution must be >= 2");
  const RowMatrix pts = dense_grid(model.geometry().bounds(), resolution);
  return encode_field(pts, evaluate(model, pts), resolution, range);
}

ExportedField export_field(const ScalarField& field, int dim, int resolution, std::optional<std::pair<double, double>> range) {
  if (resolution < 2) throw ConfigError("export resolution must be >= 2");
  const RowMatrix pts = evaluation_grid(dim, resolution);
  RowMatrix values(pts.rows(), 1);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) values(i, 0) = field(row_of(pts, i));
  return encode_field(pts, values, resolution, range);
}

}  // namespace mfgrid
