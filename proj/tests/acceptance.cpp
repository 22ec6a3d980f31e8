// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 if any fails.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfgrid/csv.hpp"
#include "mfgrid/errors.hpp"
#include "mfgrid/gtk.hpp"
#include "mfgrid/model_config.hpp"
#include "mfgrid/netpbm.hpp"
#include "mfgrid/sdf.hpp"
#include "mfgrid/spectrum.hpp"
#include "mfgrid/tasks.hpp"
#include "mfgrid/training.hpp"

using namespace mfgrid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

RowMatrix uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

ModelConfig model_config(KernelVariant v, std::vector<int> res) {
  ModelConfig cfg;
  cfg.kernel.variant = v;
  cfg.geometry.resolution = std::move(res);
  return cfg;
}

const char* variant_name(KernelVariant v) {
  switch (v) {
    case KernelVariant::Multilinear: return "multilinear";
    case KernelVariant::GaussianRbf: return "gaussian";
    case KernelVariant::MulFA: return "mulfa";
  }
  return "?";
}

constexpr KernelVariant kVariants[] = {KernelVariant::Multilinear, KernelVariant::GaussianRbf, KernelVariant::MulFA};

// Shared setup of the first two criteria: MulFA, 1D, 64 nodes, 32 samples, eta 0.1, 500 steps.
struct DynamicsRun {
  GridModel model;
  Dataset data;
  TrainConfig train;
};

DynamicsRun dynamics_setup() {
  std::mt19937_64 rng(0);
  DynamicsRun r{build_model(model_config(KernelVariant::MulFA, {64}), 1, 1, 0), {}, {}};
  r.data.points = uniform(rng, 32, 1);
  r.data.targets = uniform(rng, 32, 1);
  r.train.lr = 0.1;
  r.train.steps = 500;
  r.train.snapshot_every = 1;
  return r;
}

Outcome stationarity() {
  auto run = dynamics_setup();
  const auto g0 = gtk_compute(run.model, run.data.points).matrix();
  double worst = 0.0;
  std::size_t snaps = 0;
  try {
    train(run.model, run.data, run.train, [&](const GridModel& m, const Snapshot&) {
      worst = std::max(worst, (gtk_compute(m, run.data.points).matrix() - g0).cwiseAbs().maxCoeff());
      ++snaps;
    });
  } catch (const DivergenceError& e) {
    return {false, std::string(e.what()) + " (lambda_max(G) = " + fmt(gtk_compute(run.model, run.data.points).lambda_max()) +
                       ", 2/eta = 20); drift before divergence " + fmt(worst)};
  }
  return {worst <= 1e-10, "max|G(t)-G(0)| = " + fmt(worst) + " over " + std::to_string(snaps) + " snapshots"};
}

Outcome discrete_dynamics() {
  auto run = dynamics_setup();
  run.train.record_outputs = true;
  const auto g = gtk_compute(run.model, run.data.points).matrix();
  TrainResult res{run.model, {}};
  try {
    res = train(run.model, run.data, run.train);
  } catch (const DivergenceError& e) {
    return {false, e.what()};
  }
  const auto& s = res.history.snapshots;
  double worst = 0.0;
  for (std::size_t t = 0; t + 1 < s.size(); ++t) {
    const RowMatrix r = (s[t + 1].outputs - s[t].outputs) + run.train.lr * (g * (s[t].outputs - run.data.targets));
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, "max residual " + fmt(worst) + " over " + std::to_string(s.size() - 1) + " steps"};
}

// Random zero-init instance for a given variant; eta = 1 / lambda_max.
struct Instance {
  GridModel model;
  Dataset data;
  GtkMatrix g;
};

Instance random_instance(KernelVariant v, std::mt19937_64& rng, int max_points) {
  std::uniform_int_distribution<int> dim_d(1, 2), res_d(3, 10), n_d(2, max_points);
  const int dim = dim_d(rng);
  auto cfg = model_config(v, std::vector<int>(static_cast<std::size_t>(dim), res_d(rng)));
  Instance inst{build_model(cfg, dim, 1, rng()), {}, {}};
  const int n = n_d(rng);
  inst.data.points = uniform(rng, n, dim);
  inst.data.targets = uniform(rng, n, 1);
  inst.g = gtk_compute(inst.model, inst.data.points);
  return inst;
}

Outcome closed_form() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto inst = random_instance(kVariants[k % 3], rng, 24);
    TrainConfig tc;
    tc.lr = 1.0 / inst.g.lambda_max();
    tc.steps = 1000;
    tc.snapshot_every = 1;
    tc.record_outputs = true;
    const auto res = train(inst.model, inst.data, tc);
    for (const auto& s : res.history.snapshots) {
      const auto cf = closed_form_outputs(inst.g, inst.data.targets, tc.lr, s.step);
      worst = std::max(worst, (cf.outputs - s.outputs).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-8, "max |O(t) - closed form| = " + fmt(worst) + " over 20 instances, t <= 1000"};
}

Outcome weight_bound() {
  std::mt19937_64 rng(4);
  int accepted = 0, drawn = 0;
  double worst = std::numeric_limits<double>::infinity();
  bool all_hold = true;
  while (accepted < 20 && drawn < 5000) {
    ++drawn;
    const auto inst = random_instance(kVariants[drawn % 3], rng, 6);
    if (inst.g.lambda_min() <= 0.05) continue;
    ++accepted;
    TrainConfig tc;
    tc.lr = 1.0 / inst.g.lambda_max();
    tc.steps = 1000;
    tc.snapshot_every = 1;
    const auto res = train(inst.model, inst.data, tc);
    const auto check = weight_change_bound_check(res.history, inst.g, inst.data.targets);
    all_hold = all_hold && check.holds;
    worst = std::min(worst, check.worst_margin);
  }

  // Tightness witness: one sample on a node, where the trained weight reaches y exactly.
  GridModel m(GridGeometry::regular({3}), Multilinear{}, 1);
  Dataset data{RowMatrix::Constant(1, 1, 0.5), RowMatrix::Constant(1, 1, 0.8)};
  TrainConfig tc;
  tc.lr = 0.5;
  tc.steps = 200;
  tc.snapshot_every = 1;
  const auto res = train(m, data, tc);
  const auto tight = weight_change_bound_check(res.history, gtk_compute(m, data.points), data.targets);
  const bool ok = accepted == 20 && all_hold && tight.holds && std::abs(tight.worst_margin) <= 1e-6;
  return {ok, std::to_string(accepted) + " instances (of " + std::to_string(drawn) + " drawn), worst margin " + fmt(worst) +
                  "; witness margin " + fmt(tight.worst_margin)};
}

Outcome equivalent_form() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim_d(1, 3), res_d(2, 6), n_d(1, 40), kind_d(0, 1);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const auto v = kVariants[k % 3];
    const int dim = dim_d(rng);
    auto cfg = model_config(v, std::vector<int>(static_cast<std::size_t>(dim), res_d(rng)));
    if (v != KernelVariant::Multilinear && kind_d(rng) == 1) {
      cfg.geometry.kind = GridKind::Irregular;
      cfg.geometry.random_points = 30;
      cfg.geometry.k = 1 + static_cast<int>(rng() % 8);
    }
    const auto model = build_model(cfg, dim, 1, rng());
    const auto x = uniform(rng, n_d(rng), dim);
    const auto z = gradient_matrix(model, x);
    worst = std::max(worst, (z.transpose() * z - gtk_compute(model, x).matrix()).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, "max |Z^T Z - G| = " + fmt(worst) + " over 50 configs"};
}

Outcome partition_of_unity() {
  std::mt19937_64 rng(6);
  std::string detail;
  bool ok = true;
  for (const auto v : kVariants) {
    const auto model = build_model(model_config(v, {16, 16}), 2, 1, 6);
    const auto x = uniform(rng, 10000, 2);
    double worst = 0.0;
    int fallbacks = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto nw = node_weights(model, Point(x.row(i).data(), 2));
      if (nw.fallback) {
        ++fallbacks;
        continue;
      }
      double sum = 0.0;
      for (double w : nw.weights) sum += w;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    ok = ok && worst <= 1e-12;
    detail += std::string(detail.empty() ? "" : ", ") + variant_name(v) + " " + fmt(worst);
    if (fallbacks) detail += " (" + std::to_string(fallbacks) + " fallback)";
  }
  return {ok, "max |sum phi - 1|: " + detail};
}

Outcome gradients() {
  std::mt19937_64 rng(7);
  const int d_fs[] = {2, 4};
  const int d_hs[] = {1, 2, 4};
  double worst_w = 0.0, worst_theta = 0.0;
  for (int k = 0; k < 100; ++k) {
    auto cfg = model_config(KernelVariant::MulFA, {});
    const int dim = 1 + static_cast<int>(rng() % 2);
    cfg.geometry.resolution.assign(static_cast<std::size_t>(dim), 3 + static_cast<int>(rng() % 4));
    cfg.kernel.d_f = d_fs[k % 2];
    cfg.kernel.d_h = d_hs[(k / 2) % 3];
    cfg.kernel.n_m = 1 + (k / 6) % 3;
    auto model = build_model(cfg, dim, 1, rng());
    model.init_features_uniform(1.0, rng);
    const Dataset data{uniform(rng, 6, dim), uniform(rng, 6, 1)};
    const auto gc = gradcheck(model, data);
    worst_w = std::max(worst_w, gc.features_rel_error);
    worst_theta = std::max(worst_theta, gc.kernel_rel_error);
  }
  return {worst_w <= 1e-9 && worst_theta <= 1e-5,
          "max rel. error w " + fmt(worst_w) + ", Theta " + fmt(worst_theta) + " over 100 instances"};
}

Outcome spectrum_ordering() {
  const LineSpec line{{0.0, 0.0}, {1.0, 1.0}, 100};
  const double lin = gtk_spectrum(build_model(model_config(KernelVariant::Multilinear, {16, 16}), 2, 1, 0), line)
                         .high_frequency_fraction;
  int wins = 0;
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double hf =
        gtk_spectrum(build_model(model_config(KernelVariant::MulFA, {16, 16}), 2, 1, seed), line).high_frequency_fraction;
    wins += hf > lin;
    lo = std::min(lo, hf);
    hi = std::max(hi, hf);
  }
  return {wins >= 9, "MulFA above multilinear on " + std::to_string(wins) + "/10 seeds; MulFA hf in [" + fmt(lo) + ", " +
                         fmt(hi) + "], multilinear " + fmt(lin)};
}

Outcome bound_map_structure() {
  bool ok = true;
  std::string detail;
  for (int dim : {1, 2}) {
    const std::vector<int> res(static_cast<std::size_t>(dim), 8);
    const auto a = build_model(model_config(KernelVariant::MulFA, res), dim, 1, 9);
    const auto b = build_model(model_config(KernelVariant::Multilinear, res), dim, 1, 9);
    RowMatrix pts(2, dim);
    pts.row(0).setConstant(0.2);
    pts.row(1).setConstant(0.55);
    const std::size_t n = 41;
    const auto ab = bound_difference_map(a, b, pts, -1.0, 1.0, n);
    const auto aa = bound_difference_map(a, a, pts, -1.0, 1.0, n);
    double min_delta = 0.0, asym = 0.0, self = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = i * n + j, mirror = (n - 1 - i) * n + (n - 1 - j);
        min_delta = std::min({min_delta, ab.delta_a[k], ab.delta_b[k]});
        asym = std::max(asym, std::abs(ab.difference[k] - ab.difference[mirror]));
        self = std::max(self, std::abs(aa.difference[k]));
      }
    ok = ok && min_delta >= 0.0 && asym == 0.0 && self == 0.0;
    detail += std::string(detail.empty() ? "" : "; ") + std::to_string(dim) + "D: min Delta " + fmt(min_delta) +
              ", asymmetry " + fmt(asym) + ", |A-A| " + fmt(self);
  }
  return {ok, detail};
}

Outcome image_fitting() {
  const ImageTask task{load_image(fs::path(MFGRID_TEST_DATA) / "camera_crop64.pgm"), true};
  TrainConfig base;
  base.steps = 2000;
  base.snapshot_every = 2000;
  base.optimizer = OptimizerKind::Adam;
  base.lr = 0.01;

  const auto lin = fit_image(task, model_config(KernelVariant::Multilinear, {16, 16}), base).final_metrics;

  TrainConfig mulfa = base;
  mulfa.mode = TrainMode::Joint;
  mulfa.lr_kernel = 1e-3;
  int good = 0;
  std::string runs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    mulfa.seed = seed;
    Metrics m;
    try {
      m = fit_image(task, model_config(KernelVariant::MulFA, {16, 16}), mulfa).final_metrics;
    } catch (const DivergenceError&) {
      runs += " diverged";
      continue;
    }
    good += m.psnr >= 35.0 && m.psnr_holdout >= lin.psnr_holdout + 2.0;
    runs += " " + fmt(m.psnr) + "/" + fmt(m.psnr_holdout);
  }
  return {good >= 8, std::to_string(good) + "/10 seeds; multilinear train/hold-out " + fmt(lin.psnr) + "/" +
                         fmt(lin.psnr_holdout) + " dB; MulFA" + runs};
}

TrainConfig sdf_train() {
  TrainConfig tc;
  tc.steps = 2000;
  tc.snapshot_every = 2000;
  tc.mode = TrainMode::Joint;
  tc.optimizer = OptimizerKind::Adam;
  tc.lr = 0.01;
  tc.lr_kernel = 1e-3;
  return tc;
}

Outcome sdf_circle() {
  SdfTask task;
  task.shape = Circle{};
  task.eval_resolution = 64;
  const auto m = fit_sdf(task, model_config(KernelVariant::MulFA, {32, 32}), sdf_train()).final_metrics;
  return {m.iou >= 0.99 && m.nae <= 10.0, "circle IoU " + fmt(m.iou) + ", NAE " + fmt(m.nae) + " deg"};
}

Outcome sdf_sphere() {
  SdfTask task;
  task.shape = Sphere{};
  task.eval_resolution = 32;
  const auto m = fit_sdf(task, model_config(KernelVariant::MulFA, {16, 16, 16}), sdf_train()).final_metrics;
  return {m.iou >= 0.97, "sphere IoU " + fmt(m.iou) + ", NAE " + fmt(m.nae) + " deg"};
}

int shell(const std::string& command) {
  const int raw = std::system(command.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome determinism_and_formats() {
  const fs::path root = fs::temp_directory_path() / ("mfgrid_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string image = std::string(MFGRID_TEST_DATA) + "/camera_crop64.pgm";
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"fit-image", R"({"geometry": {"resolution": 16}, "train": {"steps": 50, "snapshot": 25, "mode": "joint",
        "optimizer": "adam", "lr": 0.01}, "task": {"image": ")" + image + R"("}})"},
      {"fit-sdf", R"({"geometry": {"resolution": 16}, "train": {"steps": 50, "snapshot": 25, "mode": "joint",
        "optimizer": "adam", "lr": 0.01}, "task": {"shape": {"type": "circle"}, "samples": 512, "eval_resolution": 32}})"},
      {"gtk", R"({"geometry": {"resolution": 12}, "analysis": {"line": {"start": [0.1, 0.2], "end": [0.9, 0.6], "count": 40}}})"},
      {"spectrum", R"({"geometry": {"resolution": 16, "dim": 2}})"},
      {"bound-map", R"({"geometry": {"resolution": 8, "dim": 1}, "analysis": {"resolution": 33}})"},
      {"theory-check", R"({"geometry": {"resolution": 32}, "train": {"steps": 100}})"},
  };
  int compared = 0;
  std::string mismatch;
  for (const auto& [cmd, json] : commands) {
    const auto cfg = root / (cmd + ".json");
    std::ofstream(cfg) << json;
    std::string b_flag = cmd == "bound-map" ? " --config-b " + cfg.string() : "";
    for (const char* run : {"a", "b"}) {
      const auto out = root / cmd / run;
      const int code = shell(std::string(MFGRID_CLI) + " " + cmd + " --config " + cfg.string() + b_flag + " --seed 11 --out " +
                             out.string() + " > /dev/null 2>&1");
      if (code != 0) mismatch += " " + cmd + " exit " + std::to_string(code);
    }
    for (const auto& entry : fs::directory_iterator(root / cmd / "a")) {
      const auto other = root / cmd / "b" / entry.path().filename();
      ++compared;
      if (!fs::exists(other) || read_file(entry.path()) != read_file(other))
        mismatch += " " + cmd + "/" + entry.path().filename().string();
    }
  }

  // 8-bit round trips: binary and ASCII, gray and color.
  std::mt19937_64 rng(12);
  int trips = 0;
  for (int channels : {1, 3}) {
    Image img;
    img.width = 37;
    img.height = 23;
    img.channels = channels;
    img.data.resize(static_cast<std::size_t>(img.width * img.height * channels));
    for (auto& v : img.data) v = static_cast<double>(rng() % 256) / 255.0;
    const auto bytes = encode_netpbm(img);
    const auto back = decode_netpbm(bytes);
    if (back.data != img.data || encode_netpbm(back) != bytes) mismatch += " binary round trip";
    std::string ascii = (channels == 1 ? "P2\n" : "P3\n") + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    for (double v : img.data) ascii += std::to_string(quantize(v)) + "\n";
    if (encode_netpbm(decode_netpbm(ascii)) != bytes) mismatch += " ascii round trip";
    trips += 2;
  }
  fs::remove_all(root);
  return {mismatch.empty(), std::to_string(compared) + " artifacts byte-identical across reruns, " + std::to_string(trips) +
                                " netpbm round trips" + (mismatch.empty() ? "" : "; mismatch:" + mismatch)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "GTK stationarity", 5, stationarity},
      {2, "discrete dynamics", 5, discrete_dynamics},
      {3, "closed-form trajectory", 30, closed_form},
      {4, "weight-change bound", 30, weight_bound},
      {5, "equivalent GTK form", 10, equivalent_form},
      {6, "partition of unity", 10, partition_of_unity},
      {7, "gradient correctness", 60, gradients},
      {8, "spectrum ordering", 30, spectrum_ordering},
      {9, "bound map structure", 10, bound_map_structure},
      {10, "image fitting", 300, image_fitting},
      {11, "SDF fitting", 600,
       [] {
         const auto t0 = std::chrono::steady_clock::now();
         auto circle = sdf_circle();
         const double t_circle = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
         auto sphere = sdf_sphere();
         const double t_sphere = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() - t_circle;
         const bool in_time = t_circle < 300 && t_sphere < 300;
         return Outcome{circle.passed && sphere.passed && in_time, circle.detail + "; " + sphere.detail};
       }},
      {12, "determinism and formats", 60, determinism_and_formats},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.passed && in_time;
    failed += !pass;
    std::printf("%s %2d %-24s %s [%.1fs / %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
