#include "mfgrid/run_config.hpp"

#include <set>

#include "mfgrid/csv.hpp"
#include "mfgrid/errors.hpp"

namespace mfgrid {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

/// Object reader that remembers which keys were consumed.
class Section {
 public:
  Section(const json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_null() && !node_->is_object()) fail(path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!node_ || node_->is_null()) return nullptr;
    const auto it = node_->find(key);
    return it == node_->end() || it->is_null() ? nullptr : &*it;
  }
  bool has(const std::string& key) const { return node_ && node_->is_object() && node_->contains(key); }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key_path(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) fail(key_path(key), "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void flag(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  std::optional<std::string> text(const std::string& key) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key_path(key), "expected a string");
      return v->get<std::string>();
    }
    return std::nullopt;
  }
  std::optional<std::vector<double>> numbers(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return to_numbers(*v, key_path(key));
  }
  std::optional<RowMatrix> matrix(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_array() || v->empty()) fail(key_path(key), "expected a non-empty array of coordinate arrays");
    RowMatrix m;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto row = to_numbers((*v)[i], key_path(key) + "[" + std::to_string(i) + "]");
      if (i == 0) m.resize(static_cast<Eigen::Index>(v->size()), static_cast<Eigen::Index>(row.size()));
      if (static_cast<Eigen::Index>(row.size()) != m.cols()) fail(key_path(key), "rows must have equal length");
      for (std::size_t a = 0; a < row.size(); ++a) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = row[a];
    }
    return m;
  }
  Section child(const std::string& key) { return Section(find(key), key_path(key)); }

  void finish() const {
    if (!node_ || node_->is_null()) return;
    for (const auto& [key, value] : node_->items())
      if (!seen_.count(key)) fail(key_path(key), "unknown key");
  }

 private:
  static std::vector<double> to_numbers(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(path, "expected a non-empty array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const json* node_;
  std::string path_;
  std::set<std::string> seen_;
};

const std::pair<const char*, GridKind> kGridKinds[] = {{"regular", GridKind::Regular}, {"irregular", GridKind::Irregular}};
const std::pair<const char*, KernelVariant> kVariants[] = {
    {"multilinear", KernelVariant::Multilinear}, {"gaussian", KernelVariant::GaussianRbf}, {"mulfa", KernelVariant::MulFA}};
const std::pair<const char*, TrainMode> kModes[] = {
    {"features_only", TrainMode::FeaturesOnly}, {"joint", TrainMode::Joint}, {"decoupled", TrainMode::Decoupled}};
const std::pair<const char*, OptimizerKind> kOptimizers[] = {{"gd", OptimizerKind::GradientDescent},
                                                             {"adam", OptimizerKind::Adam}};
const std::pair<const char*, FeatureInit> kInits[] = {{"zeros", FeatureInit::Zeros}, {"uniform", FeatureInit::Uniform}};

template <class Enum, std::size_t N>
const char* name_of(const std::pair<const char*, Enum> (&table)[N], Enum value) {
  for (const auto& [label, v] : table)
    if (v == value) return label;
  return "?";
}

template <class Enum, std::size_t N>
void choose(Section& s, const std::string& key, Enum& out, const std::pair<const char*, Enum> (&table)[N]) {
  const auto name = s.text(key);
  if (!name) return;
  std::string allowed;
  for (const auto& [label, value] : table) {
    if (*name == label) {
      out = value;
      return;
    }
    allowed += allowed.empty() ? label : std::string(", ") + label;
  }
  fail(s.key_path(key), "unknown value '" + *name + "' (expected one of: " + allowed + ")");
}

template <std::size_t N>
std::array<double, N> fixed(const std::vector<double>& v, const std::string& path) {
  if (v.size() != N) fail(path, "expected " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

Shape parse_shape(Section s) {
  const auto type = s.text("type");
  if (!type) fail(s.key_path("type"), "missing shape type");
  const auto center = s.numbers("center");
  const auto path = s.key_path("center");
  Shape shape;
  if (*type == "circle") {
    Circle c;
    if (center) c.center = fixed<2>(*center, path);
    s.number("radius", c.radius);
    shape = c;
  } else if (*type == "sphere") {
    Sphere c;
    if (center) c.center = fixed<3>(*center, path);
    s.number("radius", c.radius);
    shape = c;
  } else if (*type == "box") {
    Box b;
    if (center) b.center = *center;
    if (auto h = s.numbers("half_extents")) b.half_extents = *h;
    if (center && !s.has("half_extents")) b.half_extents.assign(b.center.size(), 0.25);
    if (b.half_extents.size() != b.center.size()) fail(s.key_path("half_extents"), "dimension differs from center");
    shape = b;
  } else if (*type == "torus") {
    Torus t;
    if (center) t.center = fixed<3>(*center, path);
    s.number("major_radius", t.major_radius);
    s.number("minor_radius", t.minor_radius);
    shape = t;
  } else {
    fail(s.key_path("type"), "unknown shape '" + *type + "' (expected circle, box, sphere or torus)");
  }
  s.finish();
  validate_shape(shape);
  return shape;
}

ordered_json shape_json(const Shape& shape) {
  ordered_json j;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          j["type"] = "circle";
          j["center"] = s.center;
          j["radius"] = s.radius;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          j["type"] = "sphere";
          j["center"] = s.center;
          j["radius"] = s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          j["type"] = "box";
          j["center"] = s.center;
          j["half_extents"] = s.half_extents;
        } else {
          j["type"] = "torus";
          j["center"] = s.center;
          j["major_radius"] = s.major_radius;
          j["minor_radius"] = s.minor_radius;
        }
      },
      shape);
  return j;
}

ordered_json matrix_json(const RowMatrix& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index a = 0; a < m.cols(); ++a) row.push_back(m(i, a));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

RunConfig parse_run_config(const json& doc, int default_dim) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  Section root(&doc, "");
  RunConfig cfg;

  // geometry
  Section geo = root.child("geometry");
  int dim = 0;
  geo.integer("dim", dim);
  choose(geo, "kind", cfg.model.geometry.kind, kGridKinds);
  std::optional<std::vector<int>> resolution;
  if (const json* r = geo.find("resolution")) {
    std::vector<int> res;
    if (r->is_number_integer()) {
      res.push_back(r->get<int>());
    } else if (r->is_array() && !r->empty()) {
      for (const auto& e : *r) {
        if (!e.is_number_integer()) fail("geometry.resolution", "expected an integer or an array of integers");
        res.push_back(e.get<int>());
      }
    } else {
      fail("geometry.resolution", "expected an integer or an array of integers");
    }
    for (int n : res)
      if (n < 2) fail("geometry.resolution", "every axis needs at least 2 nodes");
    resolution = res;
  }
  std::optional<RowMatrix> bounds = geo.matrix("bounds");
  if (bounds && bounds->cols() != 2) fail("geometry.bounds", "expected [lo, hi] pairs");
  auto nodes = geo.matrix("points");
  geo.integer("random_points", cfg.model.geometry.random_points);
  geo.integer("k", cfg.model.geometry.k);
  geo.finish();

  // kernel
  Section ker = root.child("kernel");
  auto& kc = cfg.model.kernel;
  choose(ker, "variant", kc.variant, kVariants);
  ker.integer("d_f", kc.d_f);
  ker.integer("n_m", kc.n_m);
  ker.integer("d_h", kc.d_h);
  ker.number("sigma", kc.sigma);
  ker.number("omega_scale", kc.omega_scale);
  ker.number("output_bias", kc.output_bias);
  ker.finish();
  if (kc.d_f < 1) fail("kernel.d_f", "must be >= 1");
  if (kc.n_m < 1) fail("kernel.n_m", "must be >= 1");
  if (kc.d_h < 1) fail("kernel.d_h", "must be >= 1");
  if (!(kc.omega_scale >= 0.0)) fail("kernel.omega_scale", "must be >= 0");
  if (!std::isfinite(kc.output_bias)) fail("kernel.output_bias", "must be finite");
  if (!(kc.sigma >= 0.0)) fail("kernel.sigma", "must be >= 0 (0 selects the geometry default)");

  // train
  Section tr = root.child("train");
  auto& tc = cfg.train;
  choose(tr, "mode", tc.mode, kModes);
  tr.number("lr", tc.lr);
  tr.number("lr_kernel", tc.lr_kernel);
  tr.count("steps", tc.steps);
  tr.count("batch", tc.batch_size);
  tr.count("snapshot", tc.snapshot_every);
  if (const json* s = tr.find("seed")) {
    if (!s->is_number_unsigned()) fail("train.seed", "expected a non-negative integer");
    tc.seed = s->get<std::uint64_t>();
  }
  tr.count("alt_period", tc.alt_period);
  choose(tr, "optimizer", tc.optimizer, kOptimizers);
  tr.number("beta1", tc.adam_beta1);
  tr.number("beta2", tc.adam_beta2);
  tr.number("eps", tc.adam_eps);
  tr.count("gtk_probe", tc.gtk_probe);
  choose(tr, "init", cfg.model.init, kInits);
  tr.number("init_scale", cfg.model.init_scale);
  tr.finish();
  if (!(cfg.model.init_scale >= 0.0)) fail("train.init_scale", "must be >= 0");
  tc.validate();

  // task
  Section task = root.child("task");
  cfg.task.image = task.text("image");
  task.flag("holdout", cfg.task.holdout);
  if (task.find("shape")) {
    SdfTask sdf;
    sdf.shape = parse_shape(task.child("shape"));
    cfg.task.sdf = sdf;
  }
  {
    SdfTask probe = cfg.task.sdf.value_or(SdfTask{});
    int eval = probe.eval_resolution;
    task.count("samples", probe.samples);
    task.number("surface_band", probe.surface_band);
    task.integer("eval_resolution", eval);
    task.count("surface_samples", probe.surface_samples);
    probe.eval_resolution = eval;
    if (cfg.task.sdf) {
      cfg.task.sdf = probe;
      validate_sdf_task(probe);
    }
  }
  task.finish();
  if (cfg.task.image && cfg.task.sdf) fail("task", "give either an image or a shape, not both");

  // analysis
  Section an = root.child("analysis");
  cfg.analysis.points = an.matrix("points");
  if (an.find("line")) {
    Section line = an.child("line");
    LineSpec spec;
    if (auto v = line.numbers("start")) spec.start = *v;
    if (auto v = line.numbers("end")) spec.end = *v;
    line.count("count", spec.count);
    line.finish();
    cfg.analysis.line = spec;
  }
  an.count("samples", cfg.analysis.samples);
  if (auto yr = an.numbers("y_range")) {
    if (yr->size() != 2 || !((*yr)[0] < (*yr)[1])) fail("analysis.y_range", "expected [lo, hi] with lo < hi");
    cfg.analysis.y_lo = (*yr)[0];
    cfg.analysis.y_hi = (*yr)[1];
  }
  an.count("resolution", cfg.analysis.resolution);
  an.number("ridge", cfg.analysis.ridge);
  an.count("queries", cfg.analysis.queries);
  an.finish();
  if (!(cfg.analysis.ridge >= 0.0)) fail("analysis.ridge", "must be >= 0");
  if (cfg.analysis.resolution < 2) fail("analysis.resolution", "must be >= 2");
  if (cfg.analysis.samples < 1) fail("analysis.samples", "must be >= 1");

  // output
  Section out = root.child("output");
  if (auto d = out.text("directory")) cfg.output.directory = *d;
  out.integer("export_resolution", cfg.output.export_resolution);
  out.finish();
  if (cfg.output.export_resolution != 0 && cfg.output.export_resolution < 2)
    fail("output.export_resolution", "must be 0 (task default) or >= 2");

  root.finish();

  // Input dimension: explicit, else implied by the task, the analysis inputs or the geometry.
  const auto implied = [&]() -> int {
    if (cfg.task.image) return 2;
    if (cfg.task.sdf) return shape_dim(cfg.task.sdf->shape);
    if (cfg.analysis.points) return static_cast<int>(cfg.analysis.points->cols());
    if (cfg.analysis.line && !cfg.analysis.line->start.empty()) return static_cast<int>(cfg.analysis.line->start.size());
    if (nodes) return static_cast<int>(nodes->cols());
    if (bounds) return static_cast<int>(bounds->rows());
    if (resolution && resolution->size() > 1) return static_cast<int>(resolution->size());
    return default_dim > 0 ? default_dim : 1;
  };
  if (dim == 0) {
    dim = implied();
  } else if (dim < 1) {
    fail("geometry.dim", "must be >= 1");
  } else if ((cfg.task.image || cfg.task.sdf) && dim != implied()) {
    fail("geometry.dim", "does not match the task dimension " + std::to_string(implied()));
  }
  cfg.dim = dim;

  auto& gc = cfg.model.geometry;
  if (resolution) {
    if (resolution->size() == 1) resolution->assign(static_cast<std::size_t>(dim), resolution->front());
    if (static_cast<int>(resolution->size()) != dim) fail("geometry.resolution", "needs 1 or " + std::to_string(dim) + " entries");
    gc.resolution = *resolution;
  } else {
    gc.resolution.assign(static_cast<std::size_t>(dim), gc.resolution.front());
  }
  if (bounds) {
    if (bounds->rows() != dim) fail("geometry.bounds", "needs " + std::to_string(dim) + " [lo, hi] pairs");
    gc.bounds.clear();
    for (Eigen::Index a = 0; a < dim; ++a) {
      if (!((*bounds)(a, 0) < (*bounds)(a, 1))) fail("geometry.bounds", "each pair must satisfy lo < hi");
      gc.bounds.push_back({(*bounds)(a, 0), (*bounds)(a, 1)});
    }
  } else {
    gc.bounds.assign(static_cast<std::size_t>(dim), Interval{});
  }
  if (nodes) {
    if (nodes->cols() != dim) fail("geometry.points", "coordinates must have " + std::to_string(dim) + " entries");
    gc.points = *nodes;
  }
  if (gc.kind == GridKind::Irregular) {
    if (!nodes && gc.random_points < 1) fail("geometry.points", "irregular grids need points or random_points");
    const auto m = nodes ? static_cast<int>(nodes->rows()) : gc.random_points;
    if (gc.k < 1 || gc.k > m) fail("geometry.k", "must lie in [1, number of nodes]");
  }
  if (cfg.analysis.points && cfg.analysis.points->cols() != dim)
    fail("analysis.points", "coordinates must have " + std::to_string(dim) + " entries");
  if (cfg.analysis.line) {
    auto& line = *cfg.analysis.line;
    if (line.start.empty()) line.start.assign(static_cast<std::size_t>(dim), 0.0);
    if (line.end.empty()) line.end.assign(static_cast<std::size_t>(dim), 1.0);
    if (static_cast<int>(line.start.size()) != dim) fail("analysis.line.start", "needs " + std::to_string(dim) + " entries");
    if (static_cast<int>(line.end.size()) != dim) fail("analysis.line.end", "needs " + std::to_string(dim) + " entries");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path, int default_dim) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_run_config(doc, default_dim);
}

ordered_json resolved_config(const RunConfig& cfg) {
  ordered_json j;
  const auto& gc = cfg.model.geometry;
  auto& geo = j["geometry"];
  geo["dim"] = cfg.dim;
  geo["kind"] = name_of(kGridKinds, gc.kind);
  geo["resolution"] = gc.resolution;
  ordered_json bounds = ordered_json::array();
  for (const auto& b : gc.bounds) bounds.push_back({b.lo, b.hi});
  geo["bounds"] = bounds;
  if (gc.kind == GridKind::Irregular) {
    if (gc.points.rows() > 0)
      geo["points"] = matrix_json(gc.points);
    else
      geo["random_points"] = gc.random_points;
    geo["k"] = gc.k;
  }

  const auto& kc = cfg.model.kernel;
  auto& ker = j["kernel"];
  ker["variant"] = name_of(kVariants, kc.variant);
  if (kc.variant == KernelVariant::MulFA) {
    ker["d_f"] = kc.d_f;
    ker["n_m"] = kc.n_m;
    ker["d_h"] = kc.d_h;
    ker["omega_scale"] = kc.omega_scale;
    ker["output_bias"] = kc.output_bias;
  }
  if (kc.variant == KernelVariant::GaussianRbf) ker["sigma"] = kc.sigma;

  const auto& tc = cfg.train;
  auto& tr = j["train"];
  tr["mode"] = name_of(kModes, tc.mode);
  tr["lr"] = tc.lr;
  tr["lr_kernel"] = tc.lr_kernel;
  tr["steps"] = tc.steps;
  tr["batch"] = tc.batch_size;
  tr["snapshot"] = tc.snapshot_every;
  tr["seed"] = tc.seed;
  tr["alt_period"] = tc.alt_period;
  tr["optimizer"] = name_of(kOptimizers, tc.optimizer);
  tr["beta1"] = tc.adam_beta1;
  tr["beta2"] = tc.adam_beta2;
  tr["eps"] = tc.adam_eps;
  tr["gtk_probe"] = tc.gtk_probe;
  tr["init"] = name_of(kInits, cfg.model.init);
  tr["init_scale"] = cfg.model.init_scale;

  if (cfg.task.image) {
    j["task"]["image"] = *cfg.task.image;
    j["task"]["holdout"] = cfg.task.holdout;
  } else if (cfg.task.sdf) {
    const auto& s = *cfg.task.sdf;
    auto& t = j["task"];
    t["shape"] = shape_json(s.shape);
    t["samples"] = s.samples;
    t["surface_band"] = s.surface_band;
    t["eval_resolution"] = s.eval_resolution;
    t["surface_samples"] = s.surface_samples;
  }

  const auto& ac = cfg.analysis;
  auto& an = j["analysis"];
  if (ac.points) an["points"] = matrix_json(*ac.points);
  if (ac.line) {
    an["line"]["start"] = ac.line->start;
    an["line"]["end"] = ac.line->end;
    an["line"]["count"] = ac.line->count;
  }
  an["samples"] = ac.samples;
  an["y_range"] = {ac.y_lo, ac.y_hi};
  an["resolution"] = ac.resolution;
  an["ridge"] = ac.ridge;
  an["queries"] = ac.queries;

  j["output"]["export_resolution"] = cfg.output.export_resolution;
  return j;
}

std::string_view config_reference() {
  return R"(Configuration (JSON). Every key is optional unless noted; unknown keys are rejected.
  geometry.dim              input dimension (default: implied by task/analysis/geometry, else 1)
  geometry.kind             "regular" | "irregular"                     (default "regular")
  geometry.resolution       nodes per axis, integer or array            (default 16)
  geometry.bounds           [[lo, hi], ...] per axis                   (default unit box)
  geometry.points           irregular node coordinates
  geometry.random_points    irregular: draw this many uniform nodes     (default 0)
  geometry.k                irregular: neighbours per query             (default 8)
  kernel.variant            "multilinear" | "gaussian" | "mulfa"        (default "mulfa")
  kernel.d_f, n_m, d_h      MulFA Fourier features per axis, layers, hidden width (10, 3, 16)
  kernel.omega_scale        MulFA filter frequency range               (default 32*pi)
  kernel.output_bias        MulFA output-layer bias at init            (default 1.0)
  kernel.sigma              Gaussian bandwidth, 0 = one cell width     (default 0)
  train.mode                "features_only" | "joint" | "decoupled"     (default "features_only")
  train.lr, lr_kernel       feature / kernel rates; lr_kernel 0 = lr/10 (0.1, 0)
  train.steps               updates                                     (default 1000)
  train.batch               minibatch size, 0 = full batch              (default 0)
  train.snapshot            snapshot period                             (default 100)
  train.seed                RNG seed (overridden by --seed)             (default 0)
  train.alt_period          decoupled block length                      (default 100)
  train.optimizer           "gd" | "adam"                               (default "gd")
  train.beta1, beta2, eps   adam moments                                (0, 0.999, 1e-8)
  train.gtk_probe           samples tracked for GTK drift, 0 = off      (default 0)
  train.init, init_scale    "zeros" | "uniform" features, half-width    ("zeros", 1e-4)
  task.image                PGM/PPM path (fit-image, required)
  task.holdout              hold out odd-row/odd-column pixels          (default true)
  task.shape                {type: circle|box|sphere|torus, center, radius | half_extents |
                             major_radius, minor_radius} (fit-sdf, required)
  task.samples              SDF training samples, half near the surface (default 4096)
  task.surface_band         std. dev. of near-surface offsets           (default 0.02)
  task.eval_resolution      IoU grid per axis                           (default 64)
  task.surface_samples      NAE surface samples                         (default 512)
  analysis.points           input coordinates for gtk / bound-map / theory-check
  analysis.line             {start, end, count} for gtk / spectrum      (default unit diagonal, 100)
  analysis.samples          random theory-check inputs without points   (default 32)
  analysis.y_range          bound-map target range                      (default [-1, 1])
  analysis.resolution       bound-map grid per axis                     (default 64)
  analysis.ridge            bound-map ridge                             (default 1e-8)
  analysis.queries          partition-of-unity queries                  (default 10000)
  output.directory          artifact directory (overridden by --out)    (default "out")
  output.export_resolution  field export grid, 0 = task default         (default 0)
)";
}

}  // namespace mfgrid
