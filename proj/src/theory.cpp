#include "mfgrid/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "mfgrid/errors.hpp"
#include "mfgrid/gtk.hpp"

namespace mfgrid {

bool TheoryReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const TheoryCheck& c) { return c.passed || c.skipped; });
}

namespace {

TheoryCheck make_check(std::string name, double residual, double tolerance) {
  TheoryCheck c;
  c.name = std::move(name);
  c.residual = residual;
  c.tolerance = tolerance;
  c.passed = std::isfinite(residual) && residual <= tolerance;
  return c;
}

double inf_norm(const RowMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

void trajectory_checks(const TrainResult& trained, const GtkMatrix& g, const Dataset& data, const TrainConfig& config,
                       TheoryReport& report) {
  const auto& snaps = trained.history.snapshots;
  double drift = 0.0;
  for (const auto& s : snaps) drift = std::max(drift, s.gtk_drift);
  report.checks.push_back(make_check("gtk_stationarity", drift, 1e-10));

  double dyn = 0.0;
  for (std::size_t t = 0; t + 1 < snaps.size(); ++t) {
    const RowMatrix& o = snaps[t].outputs;
    const RowMatrix step = snaps[t + 1].outputs - o;
    const RowMatrix predicted = config.lr * (g.matrix() * (o - data.targets));
    dyn = std::max(dyn, inf_norm(step + predicted));
  }
  report.checks.push_back(make_check("one_step_dynamics", dyn, 1e-10));

  // Y - (I - eta G)^t (Y - O(0)); reduces to the zero-init form when O(0) = 0.
  const RowMatrix o0 = snaps.front().outputs;
  const RowMatrix residual0 = data.targets - o0;
  double closed = 0.0;
  bool divergent = false;
  for (const auto& s : snaps) {
    const auto cf = closed_form_outputs(g, residual0, config.lr, s.step);
    divergent = cf.divergent;
    closed = std::max(closed, inf_norm(s.outputs - (cf.outputs + o0)));
  }
  auto closed_check = make_check("closed_form_trajectory", closed, 1e-8);
  if (divergent) closed_check.detail = "spectral radius of I - eta G exceeds 1";
  report.checks.push_back(closed_check);

  {
    TheoryCheck c;
    c.name = "weight_change_bound";
    c.tolerance = 1e-6;
    try {
      const auto wb = weight_change_bound_check(trained.history, g, residual0);
      // Written as bound + tol - ||dw|| so that residual <= tolerance means "holds".
      c.residual = std::max(0.0, -wb.worst_margin);
      c.passed = wb.holds;
      std::ostringstream os;
      os.precision(17);
      os << "bound " << wb.bound << ", worst margin " << wb.worst_margin;
      c.detail = os.str();
    } catch (const PreconditionError& e) {
      c.skipped = true;
      c.detail = e.what();
    }
    report.checks.push_back(c);
  }
}

}  // namespace

TheoryReport run_theory_suite(const GridModel& model, const Dataset& data, const TrainConfig& config,
                              const TheoryOptions& options) {
  if (config.mode != TrainMode::FeaturesOnly) throw ConfigError("theory_check requires FeaturesOnly");
  const auto n = static_cast<std::size_t>(data.points.rows());
  if (config.optimizer != OptimizerKind::GradientDescent || (config.batch_size != 0 && config.batch_size < n))
    throw ConfigError("theory_check requires full-batch gradient descent");
  validate_dataset(data, model);

  TheoryReport report;

  TrainConfig run = config;
  run.snapshot_every = 1;
  run.record_outputs = true;
  run.gtk_probe = n;
  const GtkMatrix g = gtk_compute(model, data.points);
  std::optional<TrainResult> result;
  try {
    result.emplace(train(model, data, run));
  } catch (const DivergenceError& e) {
    for (const char* name : {"gtk_stationarity", "one_step_dynamics", "closed_form_trajectory", "weight_change_bound"}) {
      auto c = make_check(name, std::numeric_limits<double>::infinity(), 0.0);
      c.detail = e.what();
      report.checks.push_back(c);
    }
  }
  if (result) trajectory_checks(*result, g, data, config, report);

  const GtkMatrix zz = gtk_compute_reference(model, data.points);
  report.checks.push_back(make_check("gtk_equals_ZtZ", inf_norm(zz.matrix() - g.matrix()), 1e-12));

  {
    std::mt19937_64 rng(options.seed ^ 0x5bd1e995ULL);
    const auto& bounds = model.geometry().bounds();
    std::vector<double> x(bounds.size());
    double worst = 0.0;
    std::size_t fallbacks = 0;
    for (std::size_t q = 0; q < options.pou_queries; ++q) {
      for (std::size_t a = 0; a < bounds.size(); ++a)
        x[a] = std::uniform_real_distribution<double>(bounds[a].lo, bounds[a].hi)(rng);
      const auto nw = node_weights(model, x);
      if (nw.fallback) {
        ++fallbacks;
        continue;
      }
      double sum = 0.0;
      for (double w : nw.weights) sum += w;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    auto c = make_check("partition_of_unity", worst, 1e-12);
    c.detail = std::to_string(fallbacks) + " fallback queries excluded";
    report.checks.push_back(c);
  }

  {
    GridModel probe = model;
    std::mt19937_64 rng(options.seed ^ 0x27d4eb2fULL);
    probe.init_features_uniform(1.0, rng);
    const auto count = static_cast<Eigen::Index>(std::min(options.gradcheck_samples, n));
    const Dataset subset{data.points.topRows(count), data.targets.topRows(count)};
    const auto gc = gradcheck(probe, subset);
    report.checks.push_back(make_check("gradcheck_features", gc.features_rel_error, 1e-9));
    if (gc.has_kernel) report.checks.push_back(make_check("gradcheck_kernel", gc.kernel_rel_error, 1e-5));
  }
  return report;
}

}  // namespace mfgrid
