#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfgrid/model.hpp"

namespace mfgrid {

enum class TrainMode { FeaturesOnly, Joint, Decoupled };
enum class OptimizerKind { GradientDescent, Adam };

struct TrainConfig {
  TrainMode mode = TrainMode::FeaturesOnly;
  double lr = 0.1;
  double lr_kernel = 0.0;  ///< <= 0 selects 0.1 * lr
  std::size_t steps = 1000;
  std::size_t batch_size = 0;  ///< 0 = full batch
  std::size_t snapshot_every = 100;
  std::uint64_t seed = 0;
  std::size_t alt_period = 100;  ///< Decoupled: steps per block, kernel block first
  OptimizerKind optimizer = OptimizerKind::GradientDescent;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t gtk_probe = 0;  ///< samples used for GTK drift snapshots (0 = off)
  bool record_outputs = false;
  /// Test hook: applies the feature update with the wrong sign.
  bool invert_feature_update = false;

  void validate() const;
  double kernel_lr() const noexcept { return lr_kernel > 0.0 ? lr_kernel : 0.1 * lr; }
};

struct Dataset {
  RowMatrix points;   ///< n x D
  RowMatrix targets;  ///< n x d
};

void validate_dataset(const Dataset& data, const GridModel& model);

struct Snapshot {
  std::size_t step = 0;
  double loss = 0.0;
  double weight_change = 0.0;  ///< ||w(t) - w(0)||_F
  double gtk_drift = std::numeric_limits<double>::quiet_NaN();
  RowMatrix outputs;  ///< O(t), only when TrainConfig::record_outputs
};

struct TrainHistory {
  std::vector<double> loss;  ///< loss[t] at the state after t updates (batch loss for minibatches)
  std::vector<Snapshot> snapshots;
  bool kernel_mutated = false;
};

/// 1/2 sum_i ||Y_i - g(X_i)||^2 (no mean reduction).
double mse_loss(const GridModel& model, const Dataset& data);

/// Analytic loss gradient through the per-sample reference path.
struct LossGradient {
  double loss = 0.0;
  RowMatrix features;
  std::optional<MulFAParams> kernel;
};
LossGradient loss_gradient(const GridModel& model, const Dataset& data);

/// One update with full-batch plain gradient descent semantics of `config`
/// (mode and rates); `step_index` selects the Decoupled block.
void gd_step(GridModel& model, const Dataset& data, const TrainConfig& config, std::size_t step_index = 0);

struct TrainResult {
  GridModel model;
  TrainHistory history;
};

using SnapshotCallback = std::function<void(const GridModel&, const Snapshot&)>;

/// Runs `config.steps` updates. Throws DivergenceError on a non-finite loss.
TrainResult train(GridModel model, const Dataset& data, const TrainConfig& config,
                  const SnapshotCallback& on_snapshot = {});

struct GradcheckReport {
  double features_rel_error = 0.0;
  double features_abs_error = 0.0;
  double kernel_rel_error = 0.0;
  double kernel_abs_error = 0.0;
  bool has_kernel = false;
};

/// Analytic loss gradients against central differences. Relative error of a
/// group is max|analytic - fd| / max(max|analytic|, max|fd|, 1e-6).
GradcheckReport gradcheck(const GridModel& model, const Dataset& data, double step = 1e-5);

/// CSV with columns step,loss,weight_change_norm,gtk_drift (one row per snapshot).
std::string history_csv(const TrainHistory& history);

}  // namespace mfgrid
