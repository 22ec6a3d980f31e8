#include "mfgrid/commands.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include <json.hpp>

#include "mfgrid/csv.hpp"
#include "mfgrid/errors.hpp"
#include "mfgrid/gtk.hpp"
#include "mfgrid/run_config.hpp"
#include "mfgrid/spectrum.hpp"
#include "mfgrid/tasks.hpp"
#include "mfgrid/theory.hpp"

namespace mfgrid {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }
  void write(const std::string& name, std::string_view contents) const { write_file_atomic(dir_ / name, contents); }

 private:
  fs::path dir_;
};

RunConfig load(const std::optional<std::string>& path, const CommandOptions& options, int default_dim = 0) {
  RunConfig cfg = path ? load_run_config(*path, default_dim) : parse_run_config(nlohmann::json::object(), default_dim);
  if (options.seed) cfg.train.seed = *options.seed;
  if (options.out) cfg.output.directory = *options.out;
  return cfg;
}

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["step"] = m.step;
  j["psnr"] = number(m.psnr);
  j["psnr_holdout"] = number(m.psnr_holdout);
  j["iou"] = number(m.iou);
  j["nae_degrees"] = number(m.nae);
  return j;
}

void write_field(const OutputDir& out, const ExportedField& field) {
  out.write("field." + field.extension, field.contents);
  if (!field.sidecar_json.empty()) out.write("field.json", field.sidecar_json);
}

int fit_image_cmd(const CommandOptions& options, std::ostream& log) {
  const RunConfig cfg = load(options.config, options, 2);
  if (!cfg.task.image) throw ConfigError("task.image: fit-image needs an input image path");
  ImageTask task;
  try {
    task.image = load_image(*cfg.task.image);
  } catch (const ParseError& e) {
    throw IoError("task.image: " + *cfg.task.image + ": " + e.what());
  }
  task.holdout = cfg.task.holdout;
  validate_image(task.image);
  const FitResult fit = fit_image(task, cfg.model, cfg.train);

  const OutputDir out(cfg.output.directory);
  ordered_json metrics;
  metrics["command"] = "fit-image";
  metrics["final"] = metrics_json(fit.final_metrics);
  metrics["snapshots"] = ordered_json::array();
  for (const auto& m : fit.metrics) metrics["snapshots"].push_back(metrics_json(m));
  out.write("metrics.json", dump(metrics));
  out.write("history.csv", history_csv(fit.history));
  const int res = cfg.output.export_resolution ? cfg.output.export_resolution
                                               : std::max(task.image.height, task.image.width);
  write_field(out, export_field(fit.model, res));
  out.write("config.resolved.json", dump(resolved_config(cfg)));
  log << "fit-image: train PSNR " << fit.final_metrics.psnr << " dB, hold-out PSNR " << fit.final_metrics.psnr_holdout
      << " dB\n";
  return kExitOk;
}

int fit_sdf_cmd(const CommandOptions& options, std::ostream& log) {
  const RunConfig cfg = load(options.config, options);
  if (!cfg.task.sdf) throw ConfigError("task.shape: fit-sdf needs an analytic shape");
  const FitResult fit = fit_sdf(*cfg.task.sdf, cfg.model, cfg.train);

  const OutputDir out(cfg.output.directory);
  ordered_json metrics;
  metrics["command"] = "fit-sdf";
  metrics["final"] = metrics_json(fit.final_metrics);
  metrics["empty_shape"] = fit.empty_shape;
  metrics["nae_samples"] = "surface";
  metrics["nae_excluded"] = fit.nae_excluded;
  metrics["snapshots"] = ordered_json::array();
  for (const auto& m : fit.metrics) metrics["snapshots"].push_back(metrics_json(m));
  out.write("metrics.json", dump(metrics));
  out.write("history.csv", history_csv(fit.history));
  const int res = cfg.output.export_resolution ? cfg.output.export_resolution : cfg.task.sdf->eval_resolution;
  write_field(out, export_field(fit.model, res));
  out.write("config.resolved.json", dump(resolved_config(cfg)));
  log << "fit-sdf: IoU " << fit.final_metrics.iou << ", NAE " << fit.final_metrics.nae << " deg\n";
  return kExitOk;
}

RowMatrix analysis_points(const RunConfig& cfg, const char* command) {
  if (cfg.analysis.points) return *cfg.analysis.points;
  if (cfg.analysis.line) return line_points(*cfg.analysis.line);
  throw ConfigError(std::string("analysis.points: ") + command + " needs analysis.points or analysis.line");
}

int gtk_cmd(const CommandOptions& options, std::ostream& log) {
  const RunConfig cfg = load(options.config, options);
  const RowMatrix points = analysis_points(cfg, "gtk");
  const GridModel model = build_model(cfg.model, cfg.dim, 1, cfg.train.seed);
  const GtkMatrix g = gtk_compute(model, points);

  std::string csv;
  for (Eigen::Index i = 0; i < g.size(); ++i) csv += csv_row({g.matrix().row(i).data(), static_cast<std::size_t>(g.size())});
  ordered_json report;
  report["n"] = g.size();
  report["lambda_min"] = number(g.lambda_min());
  report["lambda_max"] = number(g.lambda_max());
  report["symmetry_residual"] = number(g.symmetry_residual());
  report["psd_residual"] = number(g.psd_residual());
  report["provenance"] = g.provenance();

  const OutputDir out(cfg.output.directory);
  out.write("gtk.csv", csv);
  out.write("report.json", dump(report));
  out.write("config.resolved.json", dump(resolved_config(cfg)));
  log << "gtk: " << g.size() << "x" << g.size() << ", lambda_min " << g.lambda_min() << "\n";
  return kExitOk;
}

LineSpec default_line(const RunConfig& cfg) {
  if (cfg.analysis.line) return *cfg.analysis.line;
  LineSpec line;
  for (const auto& b : cfg.model.geometry.bounds) {
    line.start.push_back(b.lo);
    line.end.push_back(b.hi);
  }
  return line;
}

int spectrum_cmd(const CommandOptions& options, std::ostream& log) {
  RunConfig cfg = load(options.config, options);
  cfg.analysis.line = default_line(cfg);
  const GridModel model = build_model(cfg.model, cfg.dim, 1, cfg.train.seed);
  const SpectrumReport rep = gtk_spectrum(model, *cfg.analysis.line);

  std::string csv = "bin,magnitude,cumulative_energy_fraction\n";
  for (std::size_t k = 0; k < rep.magnitude.size(); ++k)
    csv += std::to_string(k) + "," + format_double(rep.magnitude[k]) + "," + format_double(rep.cumulative[k]) + "\n";
  csv += "hf," + std::to_string(rep.cutoff_bin) + "," + format_double(rep.high_frequency_fraction) + "\n";

  const OutputDir out(cfg.output.directory);
  out.write("spectrum.csv", csv);
  out.write("config.resolved.json", dump(resolved_config(cfg)));
  log << "spectrum: high-frequency energy fraction " << rep.high_frequency_fraction << "\n";
  return kExitOk;
}

int bound_map_cmd(const CommandOptions& options, std::ostream& log) {
  if (!options.config_b) throw ConfigError("--config-b: bound-map needs a second configuration");
  RunConfig a = load(options.config, options);
  const RunConfig b = load(options.config_b, options, a.dim);
  if (b.dim != a.dim) throw ConfigError("geometry.dim: the two configurations differ in dimension");
  for (int axis = 0; axis < a.dim; ++axis) {
    const auto& ba = a.model.geometry.bounds[static_cast<std::size_t>(axis)];
    const auto& bb = b.model.geometry.bounds[static_cast<std::size_t>(axis)];
    if (ba.lo != bb.lo || ba.hi != bb.hi) throw ConfigError("geometry.bounds: the two configurations must share a domain");
  }
  if (!a.analysis.points) {
    // Default two-point dataset: x1 at the domain start, x2 at its middle.
    RowMatrix pts(2, a.dim);
    for (int axis = 0; axis < a.dim; ++axis) {
      const auto& bd = a.model.geometry.bounds[static_cast<std::size_t>(axis)];
      pts(0, axis) = bd.lo;
      pts(1, axis) = 0.5 * (bd.lo + bd.hi);
    }
    a.analysis.points = pts;
  }
  if (a.analysis.points->rows() != 2) throw ConfigError("analysis.points: bound-map needs exactly two points");
  const GridModel ma = build_model(a.model, a.dim, 1, a.train.seed);
  const GridModel mb = build_model(b.model, b.dim, 1, b.train.seed);
  const BoundMap map = bound_difference_map(ma, mb, *a.analysis.points, a.analysis.y_lo, a.analysis.y_hi,
                                            a.analysis.resolution, a.analysis.ridge);

  std::string csv = "y_range," + format_double(map.y_lo) + "," + format_double(map.y_hi);
  for (Eigen::Index p = 0; p < 2; ++p) {
    csv += ",x" + std::to_string(p + 1);
    for (Eigen::Index axis = 0; axis < map.points.cols(); ++axis) csv += "," + format_double(map.points(p, axis));
  }
  csv += "\n";
  for (std::size_t r = 0; r < map.resolution; ++r)
    csv += csv_row({map.difference.data() + r * map.resolution, map.resolution});

  ordered_json report;
  report["resolution"] = map.resolution;
  report["y_range"] = {map.y_lo, map.y_hi};
  report["ridge"] = a.analysis.ridge;
  report["ill_conditioned_a"] = map.ill_conditioned_a;
  report["ill_conditioned_b"] = map.ill_conditioned_b;
  report["layout"] = "rows follow Y1, columns follow Y2, both ascending";

  const OutputDir out(a.output.directory);
  out.write("map.csv", csv);
  out.write("report.json", dump(report));
  out.write("config.resolved.json", dump(resolved_config(a)));
  out.write("config_b.resolved.json", dump(resolved_config(b)));
  log << "bound-map: " << map.resolution << "x" << map.resolution << " grid written\n";
  return kExitOk;
}

int theory_check_cmd(const CommandOptions& options, std::ostream& log) {
  RunConfig cfg = load(options.config, options);
  if (cfg.train.mode != TrainMode::FeaturesOnly) throw ConfigError("theory_check requires FeaturesOnly");
  cfg.train.invert_feature_update = options.inject_sign_flip;

  Dataset data;
  std::mt19937_64 rng(cfg.train.seed ^ 0x853c49e6748fea9bULL);
  if (cfg.analysis.points) {
    data.points = *cfg.analysis.points;
  } else {
    data.points.resize(static_cast<Eigen::Index>(cfg.analysis.samples), cfg.dim);
    for (Eigen::Index i = 0; i < data.points.rows(); ++i)
      for (int a = 0; a < cfg.dim; ++a) {
        const auto& bd = cfg.model.geometry.bounds[static_cast<std::size_t>(a)];
        data.points(i, a) = std::uniform_real_distribution<double>(bd.lo, bd.hi)(rng);
      }
  }
  data.targets.resize(data.points.rows(), 1);
  for (Eigen::Index i = 0; i < data.targets.rows(); ++i) data.targets(i, 0) = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);

  const GridModel model = build_model(cfg.model, cfg.dim, 1, cfg.train.seed);
  TheoryOptions topt;
  topt.pou_queries = cfg.analysis.queries;
  topt.seed = cfg.train.seed;
  const TheoryReport rep = run_theory_suite(model, data, cfg.train, topt);

  ordered_json report;
  report["passed"] = rep.passed();
  report["fault_injected"] = options.inject_sign_flip;
  report["checks"] = ordered_json::array();
  for (const auto& c : rep.checks) {
    ordered_json j;
    j["name"] = c.name;
    j["status"] = c.skipped ? "skipped" : (c.passed ? "pass" : "fail");
    j["residual"] = number(c.residual);
    j["tolerance"] = c.tolerance;
    if (!c.detail.empty()) j["detail"] = c.detail;
    report["checks"].push_back(j);
    log << (c.skipped ? "SKIP " : (c.passed ? "PASS " : "FAIL ")) << c.name << " residual=" << c.residual
        << " tol=" << c.tolerance << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
  }
  const OutputDir out(cfg.output.directory);
  out.write("report.json", dump(report));
  out.write("config.resolved.json", dump(resolved_config(cfg)));
  return rep.passed() ? kExitOk : kExitTheory;
}

}  // namespace

int run_command(std::string_view name, const CommandOptions& options, std::ostream& log, std::ostream& err) {
  static const std::pair<std::string_view, int (*)(const CommandOptions&, std::ostream&)> table[] = {
      {"fit-image", fit_image_cmd}, {"fit-sdf", fit_sdf_cmd},     {"gtk", gtk_cmd},
      {"spectrum", spectrum_cmd},   {"bound-map", bound_map_cmd}, {"theory-check", theory_check_cmd}};
  try {
    for (const auto& [label, fn] : table)
      if (label == name) return fn(options, log);
    err << "error: unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDivergence;
  }
}

}  // namespace mfgrid
