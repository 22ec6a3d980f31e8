#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mfgrid/model_config.hpp"
#include "mfgrid/spectrum.hpp"
#include "mfgrid/tasks.hpp"
#include "mfgrid/training.hpp"

namespace mfgrid {

struct TaskConfig {
  std::optional<std::string> image;
  bool holdout = true;
  std::optional<SdfTask> sdf;
};

struct AnalysisConfig {
  std::optional<RowMatrix> points;
  std::optional<LineSpec> line;
  std::size_t samples = 32;  ///< random inputs for theory-check when `points` is absent
  double y_lo = -1.0;
  double y_hi = 1.0;
  std::size_t resolution = 64;
  double ridge = 1e-8;
  std::size_t queries = 10000;  ///< partition-of-unity queries
};

struct OutputConfig {
  std::string directory = "out";
  int export_resolution = 0;  ///< 0: image size, or the SDF evaluation resolution
};

struct RunConfig {
  int dim = 0;  ///< resolved input dimension
  ModelConfig model;
  TrainConfig train;
  TaskConfig task;
  AnalysisConfig analysis;
  OutputConfig output;
};

/// Strict parse: unknown keys and wrongly typed values raise ConfigError
/// naming the offending key path. `default_dim` is used when neither the
/// config nor the task pins the dimension.
RunConfig parse_run_config(const nlohmann::json& doc, int default_dim = 0);
RunConfig load_run_config(const std::string& path, int default_dim = 0);

/// Fully defaulted form of `config`; parsing it yields the same run.
nlohmann::ordered_json resolved_config(const RunConfig& config);

/// Human-readable list of every key and its default.
std::string_view config_reference();

}  // namespace mfgrid
