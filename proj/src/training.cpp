#include "mfgrid/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mfgrid/batch.hpp"
#include "mfgrid/csv.hpp"
#include "mfgrid/errors.hpp"
#include "mfgrid/gtk.hpp"
#include "mfgrid/mulfa_table.hpp"

namespace mfgrid {

namespace {
constexpr double kGradcheckFloor = 1e-6;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be a positive finite number");
  if (lr_kernel < 0.0 || !std::isfinite(lr_kernel)) throw ConfigError("train.lr_kernel must be non-negative");
  if (steps < 1) throw ConfigError("train.steps must be >= 1");
  if (alt_period < 1) throw ConfigError("train.alt_period must be >= 1");
  if (snapshot_every < 1) throw ConfigError("train.snapshot must be >= 1");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0 || !(adam_eps > 0.0))
    throw ConfigError("train: adam parameters out of range");
}

void validate_dataset(const Dataset& data, const GridModel& model) {
  if (data.points.rows() < 1) throw ConfigError("dataset: at least one sample is required");
  if (data.points.rows() != data.targets.rows()) throw ConfigError("dataset: point and target counts differ");
  if (data.points.cols() != model.dim()) throw ConfigError("dataset: point dimension does not match geometry");
  if (data.targets.cols() != model.output_dim()) throw ConfigError("dataset: target dimension does not match model output");
  if (!data.points.allFinite() || !data.targets.allFinite()) throw ConfigError("dataset: values must be finite");
}

double mse_loss(const GridModel& model, const Dataset& data) {
  validate_dataset(data, model);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < data.points.rows(); ++i) {
    const auto out = model_forward(model, row_of(data.points, i));
    for (Eigen::Index c = 0; c < data.targets.cols(); ++c) {
      const double r = data.targets(i, c) - out[static_cast<std::size_t>(c)];
      loss += r * r;
    }
  }
  return 0.5 * loss;
}

LossGradient loss_gradient(const GridModel& model, const Dataset& data) {
  validate_dataset(data, model);
  LossGradient out;
  out.features = RowMatrix::Zero(model.features().rows(), model.features().cols());
  const auto* params = model.kernel_params();
  if (params) out.kernel.emplace(params->shape());
  const auto& w = model.features();
  for (Eigen::Index i = 0; i < data.points.rows(); ++i) {
    const auto x = row_of(data.points, i);
    const auto nw = node_weights(model, x);
    Vector residual = Vector::Zero(w.cols());
    for (std::size_t k = 0; k < nw.indices.size(); ++k) residual += nw.weights[k] * w.row(static_cast<Eigen::Index>(nw.indices[k])).transpose();
    residual -= data.targets.row(i).transpose();
    out.loss += 0.5 * residual.squaredNorm();
    std::vector<double> upstream(nw.indices.size());
    for (std::size_t k = 0; k < nw.indices.size(); ++k) {
      const auto node = static_cast<Eigen::Index>(nw.indices[k]);
      out.features.row(node) += nw.weights[k] * residual.transpose();
      upstream[k] = w.row(node).dot(residual);
    }
    if (params) kernel_grad_params_accumulate(*params, x, nw.indices, model.geometry(), upstream, *out.kernel);
  }
  return out;
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  std::size_t t = 0;

  void update(std::span<double> params, std::span<const double> grad, double lr, const TrainConfig& cfg) {
    if (m.size() != params.size()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
    }
  }
};

/// Batched gradient engine shared by gd_step and train.
class Engine {
 public:
  Engine(GridModel& model, const Dataset& data, const TrainConfig& config)
      : model_(model), data_(data), config_(config), stencil_(model, data.points), rng_(config.seed) {
    all_.resize(stencil_.size());
    std::iota(all_.begin(), all_.end(), std::size_t{0});
    outputs_ = RowMatrix::Zero(data.points.rows(), data.targets.cols());
    residual_ = outputs_;
  }

  std::size_t sample_count() const { return stencil_.size(); }

  /// Samples used by step t: everything for full batch, otherwise a seeded
  /// partial Fisher-Yates draw without replacement.
  const std::vector<std::size_t>& draw_batch() {
    if (config_.batch_size == 0 || config_.batch_size >= all_.size()) return all_;
    std::vector<std::size_t> pool(all_);
    batch_.resize(config_.batch_size);
    for (std::size_t k = 0; k < config_.batch_size; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng_)]);
      batch_[k] = pool[k];
    }
    std::sort(batch_.begin(), batch_.end());
    return batch_;
  }

  /// Outputs and residuals for `rows`; returns the loss over them.
  double forward(const std::vector<std::size_t>& rows) {
    refresh_weights(rows);
    const auto& w = model_.features();
    const auto d = w.cols();
    const auto width = static_cast<std::size_t>(stencil_.width());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(rows.size()); ++ks) {
      const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(ks)]);
      const auto idx = stencil_.indices(static_cast<std::size_t>(i));
      for (Eigen::Index c = 0; c < d; ++c) outputs_(i, c) = 0.0;
      for (std::size_t k = 0; k < width; ++k) {
        const double wk = weights_.weights(i, static_cast<Eigen::Index>(k));
        const double* f = w.data() + static_cast<Eigen::Index>(idx[k]) * d;
        for (Eigen::Index c = 0; c < d; ++c) outputs_(i, c) += wk * f[c];
      }
      for (Eigen::Index c = 0; c < d; ++c) residual_(i, c) = outputs_(i, c) - data_.targets(i, c);
    }
    double loss = 0.0;
    for (std::size_t i : rows) loss += residual_.row(static_cast<Eigen::Index>(i)).squaredNorm();
    return 0.5 * loss;
  }

  /// Gradient of the loss over `rows` (after forward) and the parameter update of step t.
  void update(const std::vector<std::size_t>& rows, std::size_t t) {
    const bool decoupled_kernel_block = (t / config_.alt_period) % 2 == 0;
    bool update_features = true;
    bool update_kernel = false;
    switch (config_.mode) {
      case TrainMode::FeaturesOnly:
        break;
      case TrainMode::Joint:
        update_kernel = model_.has_kernel_params();
        break;
      case TrainMode::Decoupled:
        update_features = !decoupled_kernel_block;
        update_kernel = decoupled_kernel_block && model_.has_kernel_params();
        break;
    }
    if (!update_features && !update_kernel) return;

    auto& w = model_.features();
    const auto width = static_cast<std::size_t>(stencil_.width());
    RowMatrix grad_w;
    if (update_features) {
      grad_w = RowMatrix::Zero(w.rows(), w.cols());
      for (std::size_t i : rows) {
        const auto idx = stencil_.indices(i);
        for (std::size_t k = 0; k < width; ++k)
          grad_w.row(static_cast<Eigen::Index>(idx[k])) +=
              weights_.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) *
              residual_.row(static_cast<Eigen::Index>(i));
      }
    }
    std::optional<MulFAParams> grad_k;
    if (update_kernel) grad_k = kernel_gradient(rows);

    if (update_features) {
      const double sign = config_.invert_feature_update ? -1.0 : 1.0;
      if (config_.optimizer == OptimizerKind::Adam) {
        if (sign < 0) grad_w = -grad_w;
        adam_w_.update({w.data(), static_cast<std::size_t>(w.size())},
                       {grad_w.data(), static_cast<std::size_t>(grad_w.size())}, config_.lr, config_);
      } else {
        w -= (sign * config_.lr) * grad_w;
      }
    }
    if (grad_k) {
      auto values = model_.kernel_params()->values();
      if (config_.optimizer == OptimizerKind::Adam) {
        adam_k_.update(values, grad_k->values(), config_.kernel_lr(), config_);
      } else {
        const double lr = config_.kernel_lr();
        const auto g = grad_k->values();
        for (std::size_t p = 0; p < values.size(); ++p) values[p] -= lr * g[p];
      }
      table_.reset();
      weights_stale_ = true;
      kernel_mutated_ = true;
    }
  }

  bool kernel_mutated() const { return kernel_mutated_; }
  const RowMatrix& outputs() const { return outputs_; }
  const std::vector<std::size_t>& all() const { return all_; }

 private:
  void refresh_weights(const std::vector<std::size_t>& rows) {
    if (!weights_ready_) {
      compute_weights(model_, stencil_, weights_);
      weights_ready_ = true;
      return;
    }
    if (!weights_stale_) return;
    if (!table_) table_.emplace(*model_.kernel_params(), model_.geometry());
    if (rows.size() == all_.size()) {
      compute_weights(model_, stencil_, weights_, std::nullopt, &*table_);
      weights_stale_ = false;
    } else {
      // Rows outside the batch keep stale weights until the next full refresh.
      compute_weights(model_, stencil_, weights_, std::span<const std::size_t>(rows), &*table_);
    }
  }

  MulFAParams kernel_gradient(const std::vector<std::size_t>& rows) {
    const auto& params = *model_.kernel_params();
    if (!table_) table_.emplace(params, model_.geometry());
    const auto& table = *table_;
    const auto& w = model_.features();
    const auto width = static_cast<std::size_t>(stencil_.width());
    const auto hw = static_cast<std::size_t>(table.head_width());
    const std::size_t m = model_.geometry().node_count();
    MulFAParams grad(params.shape());
    std::vector<double> node_a(m * hw, 0.0);
    std::vector<double> node_u(m, 0.0);
    std::vector<unsigned char> touched(m, 0);
    RowMatrix raw_cot(static_cast<Eigen::Index>(stencil_.size()), static_cast<Eigen::Index>(width));

    // Per-sample cotangents of the raw kernel values (disjoint rows).
#pragma omp parallel
    {
      std::vector<double> up(width), rc(width);
#pragma omp for schedule(static)
      for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(rows.size()); ++ks) {
        const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(ks)]);
        const auto idx = stencil_.indices(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < width; ++k) up[k] = w.row(static_cast<Eigen::Index>(idx[k])).dot(residual_.row(i));
        kernel_normalize_backward({weights_.weights.data() + i * static_cast<Eigen::Index>(width), width},
                                  weights_.raw_sum[static_cast<std::size_t>(i)],
                                  weights_.fallback[static_cast<std::size_t>(i)] != 0, up, rc);
        for (std::size_t k = 0; k < width; ++k) raw_cot(i, static_cast<Eigen::Index>(k)) = rc[k];
      }
    }

    // Reductions in sample order.
    std::vector<double> g_head(hw);
    for (std::size_t i : rows) {
      const auto idx = stencil_.indices(i);
      const double* a = weights_.head_inputs.data() + i * hw;
      std::fill(g_head.begin(), g_head.end(), 0.0);
      for (std::size_t k = 0; k < width; ++k) {
        const double rc = raw_cot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        if (rc == 0.0) continue;
        const std::size_t node = idx[k];
        touched[node] = 1;
        node_u[node] += rc;
        double* acc = node_a.data() + node * hw;
        const auto u = table.head(node);
        for (std::size_t h = 0; h < hw; ++h) {
          acc[h] += rc * a[h];
          g_head[h] += rc * u[h];
        }
      }
      table.accumulate_head_grad(stencil_.fourier(i), g_head, grad);
    }
    for (std::size_t node = 0; node < m; ++node) {
      if (touched[node]) table.accumulate_node_grad(node, {node_a.data() + node * hw, hw}, node_u[node], grad);
    }
    return grad;
  }

  GridModel& model_;
  const Dataset& data_;
  const TrainConfig& config_;
  SampleStencil stencil_;
  StencilWeights weights_;
  std::optional<MulFANodeTable> table_;
  bool weights_ready_ = false;
  bool weights_stale_ = false;
  bool kernel_mutated_ = false;
  std::vector<std::size_t> all_;
  std::vector<std::size_t> batch_;
  RowMatrix outputs_;
  RowMatrix residual_;
  std::mt19937_64 rng_;
  AdamState adam_w_, adam_k_;
};

void check_finite(double loss, std::size_t step) {
  if (!std::isfinite(loss))
    throw DivergenceError("training diverged: non-finite loss at step " + std::to_string(step));
}

}  // namespace

void gd_step(GridModel& model, const Dataset& data, const TrainConfig& config, std::size_t step_index) {
  config.validate();
  validate_dataset(data, model);
  TrainConfig plain = config;
  plain.optimizer = OptimizerKind::GradientDescent;
  plain.batch_size = 0;
  Engine engine(model, data, plain);
  const double loss = engine.forward(engine.all());
  check_finite(loss, step_index);
  engine.update(engine.all(), step_index);
}

TrainResult train(GridModel model, const Dataset& data, const TrainConfig& config, const SnapshotCallback& on_snapshot) {
  config.validate();
  validate_dataset(data, model);
  TrainResult result{std::move(model), {}};
  GridModel& m = result.model;
  TrainHistory& history = result.history;
  const RowMatrix w0 = m.features();

  std::optional<SampleStencil> probe;
  Matrix g0;
  const auto probe_count = std::min<std::size_t>(config.gtk_probe, static_cast<std::size_t>(data.points.rows()));
  if (probe_count > 0) {
    probe.emplace(m, RowMatrix(data.points.topRows(static_cast<Eigen::Index>(probe_count))));
    g0 = gtk_from_weights(*probe, compute_weights(m, *probe).weights);
  }

  Engine engine(m, data, config);
  const bool full_batch = config.batch_size == 0 || config.batch_size >= engine.sample_count();
  history.loss.reserve(config.steps + 1);

  for (std::size_t t = 0;; ++t) {
    const auto& rows = t == config.steps ? engine.all() : engine.draw_batch();
    const double loss = engine.forward(rows);
    check_finite(loss, t);
    history.loss.push_back(loss);

    if (t % config.snapshot_every == 0 || t == config.steps) {
      Snapshot snap;
      snap.step = t;
      snap.loss = full_batch || t == config.steps ? loss : engine.forward(engine.all());
      snap.weight_change = (m.features() - w0).norm();
      if (probe) {
        const Matrix g = gtk_from_weights(*probe, compute_weights(m, *probe).weights);
        snap.gtk_drift = (g - g0).cwiseAbs().maxCoeff();
      }
      if (config.record_outputs) snap.outputs = engine.outputs();
      if (on_snapshot) on_snapshot(m, snap);
      history.snapshots.push_back(std::move(snap));
    }
    if (t == config.steps) break;
    engine.update(rows, t);
  }
  history.kernel_mutated = engine.kernel_mutated();
  return result;
}

GradcheckReport gradcheck(const GridModel& model, const Dataset& data, double step) {
  const auto analytic = loss_gradient(model, data);
  GradcheckReport report;
  GridModel probe = model;
  const auto group = [&](std::span<double> values, std::span<const double> grad, double& rel, double& abs_err) {
    double max_err = 0.0, max_a = 0.0, max_f = 0.0;
    for (std::size_t p = 0; p < values.size(); ++p) {
      const double orig = values[p];
      values[p] = orig + step;
      const double up = mse_loss(probe, data);
      values[p] = orig - step;
      const double down = mse_loss(probe, data);
      values[p] = orig;
      const double fd = (up - down) / (2.0 * step);
      max_err = std::max(max_err, std::abs(fd - grad[p]));
      max_a = std::max(max_a, std::abs(grad[p]));
      max_f = std::max(max_f, std::abs(fd));
    }
    abs_err = max_err;
    // Floor keeps an exactly-zero gradient (e.g. node-independent filters)
    // from turning difference round-off into a relative error of 1.
    rel = max_err / std::max({max_a, max_f, kGradcheckFloor});
  };
  auto& w = probe.features();
  group({w.data(), static_cast<std::size_t>(w.size())},
        {analytic.features.data(), static_cast<std::size_t>(analytic.features.size())}, report.features_rel_error,
        report.features_abs_error);
  if (auto* params = probe.kernel_params()) {
    report.has_kernel = true;
    group(params->values(), analytic.kernel->values(), report.kernel_rel_error, report.kernel_abs_error);
  }
  return report;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "step,loss,weight_change_norm,gtk_drift\n";
  for (const auto& s : history.snapshots) {
    out += std::to_string(s.step);
    out += ',' + format_double(s.loss) + ',' + format_double(s.weight_change) + ',' + format_double(s.gtk_drift) + '\n';
  }
  return out;
}

}  // namespace mfgrid
