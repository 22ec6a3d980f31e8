#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mfgrid/training.hpp"

namespace mfgrid {

struct TheoryCheck {
  std::string name;
  bool passed = false;
  bool skipped = false;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct TheoryReport {
  std::vector<TheoryCheck> checks;
  bool passed() const;
};

struct TheoryOptions {
  std::size_t pou_queries = 10000;
  std::size_t gradcheck_samples = 8;
  std::uint64_t seed = 0;
};

/// Feature-only training invariants on one model and dataset: GTK
/// stationarity, one-step output dynamics, the closed-form trajectory,
/// Z^T Z = G, the weight-change bound, partition of unity and gradcheck.
/// `config` must describe full-batch feature-only gradient descent.
TheoryReport run_theory_suite(const GridModel& model, const Dataset& data, const TrainConfig& config,
                              const TheoryOptions& options = {});

}  // namespace mfgrid
