#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mfgrid/model_config.hpp"
#include "mfgrid/training.hpp"

namespace testing {

inline mfgrid::RowMatrix random_points(std::mt19937_64& rng, Eigen::Index n, int dim, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  mfgrid::RowMatrix x(n, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

inline mfgrid::GridModel mulfa_model(std::vector<int> res, std::uint64_t seed, int out_dim = 1, int d_f = 6, int d_h = 8,
                                     int n_m = 3) {
  mfgrid::ModelConfig cfg;
  cfg.geometry.resolution = std::move(res);
  cfg.kernel.d_f = d_f;
  cfg.kernel.d_h = d_h;
  cfg.kernel.n_m = n_m;
  return mfgrid::build_model(cfg, static_cast<int>(cfg.geometry.resolution.size()), out_dim, seed);
}

inline mfgrid::GridModel simple_model(mfgrid::KernelVariant v, std::vector<int> res, std::uint64_t seed, int out_dim = 1) {
  mfgrid::ModelConfig cfg;
  cfg.geometry.resolution = std::move(res);
  cfg.kernel.variant = v;
  cfg.kernel.d_f = 6;
  cfg.kernel.d_h = 8;
  return mfgrid::build_model(cfg, static_cast<int>(cfg.geometry.resolution.size()), out_dim, seed);
}

inline double max_abs(const mfgrid::RowMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testing
