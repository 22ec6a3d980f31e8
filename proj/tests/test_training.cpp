#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "mfgrid/batch.hpp"
#include "mfgrid/errors.hpp"
#include "mfgrid/gtk.hpp"
#include "mfgrid/training.hpp"

using namespace mfgrid;

namespace {

Dataset signal_1d(std::uint64_t seed, Eigen::Index n = 64) {
  std::mt19937_64 rng(seed);
  Dataset d{testing::random_points(rng, n, 1), RowMatrix(n, 1)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = d.points(i, 0);
    d.targets(i, 0) = std::sin(2 * std::numbers::pi * 3 * x) + 0.5 * std::sin(2 * std::numbers::pi * 11 * x);
  }
  return d;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("loss examples") {
    GridModel m(GridGeometry::regular({2}), Multilinear{}, 1);
    RowMatrix x(1, 1), y(1, 1);
    x << 0.0;
    y << 1.0;
    CHECK(mse_loss(m, {x, y}) == doctest::Approx(0.5));
    RowMatrix x2(2, 1), y2(2, 1);
    x2 << 0.0, 1.0;
    y2 << -0.1, 0.2;
    CHECK(mse_loss(m, {x2, y2}) == doctest::Approx(0.025));
    m.features() << -0.1, 0.2;
    CHECK(mse_loss(m, {x2, y2}) == 0.0);
  }

  TEST_CASE("gd step examples") {
    GridModel m(GridGeometry::regular({3}), Multilinear{}, 1);
    RowMatrix x(1, 1), y(1, 1);
    x << 0.5;
    y << 1.0;
    TrainConfig cfg;
    cfg.lr = 0.5;
    gd_step(m, {x, y}, cfg);
    CHECK(m.features()(1, 0) == doctest::Approx(0.5));
    CHECK(m.features()(0, 0) == 0.0);

    // Zero residual: nothing moves, in any mode.
    auto k = testing::mulfa_model({5}, 2);
    std::mt19937_64 rng(3);
    k.init_features_uniform(1.0, rng);
    const auto pts = testing::random_points(rng, 10, 1);
    const Dataset exact{pts, evaluate(k, pts)};
    auto before = k;
    cfg.mode = TrainMode::Joint;
    gd_step(k, exact, cfg);
    CHECK(testing::max_abs(k.features() - before.features()) == 0.0);
    for (std::size_t i = 0; i < k.kernel_params()->size(); ++i)
      CHECK(k.kernel_params()->values()[i] == before.kernel_params()->values()[i]);
  }

  TEST_CASE("feature-only steps keep the kernel and G fixed") {
    std::mt19937_64 rng(7);
    auto m = testing::mulfa_model({9}, 4);
    const auto data = signal_1d(1, 16);
    const auto g0 = gtk_compute(m, data.points).matrix();
    const auto z0 = gradient_matrix(m, data.points);
    const auto theta0 = *m.kernel_params();
    TrainConfig cfg;
    for (int s = 0; s < 5; ++s) gd_step(m, data, cfg);
    CHECK((gtk_compute(m, data.points).matrix() - g0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((gradient_matrix(m, data.points) - z0).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < theta0.size(); ++i) CHECK(m.kernel_params()->values()[i] == theta0.values()[i]);
  }

  TEST_CASE("train with one step equals gd_step") {
    auto a = testing::mulfa_model({7}, 9);
    auto b = a;
    const auto data = signal_1d(2, 20);
    TrainConfig cfg;
    cfg.mode = TrainMode::Joint;
    cfg.steps = 1;
    const auto res = train(a, data, cfg);
    gd_step(b, data, cfg);
    CHECK(testing::max_abs(res.model.features() - b.features()) <= 1e-14);
    for (std::size_t i = 0; i < b.kernel_params()->size(); ++i)
      CHECK(res.model.kernel_params()->values()[i] == doctest::Approx(b.kernel_params()->values()[i]).epsilon(1e-13));
  }

  TEST_CASE("decoupled mode alternates, kernel first") {
    auto m = testing::mulfa_model({7}, 3);
    std::mt19937_64 rng(2);
    m.init_features_uniform(1.0, rng);
    const auto data = signal_1d(3, 20);
    TrainConfig cfg;
    cfg.mode = TrainMode::Decoupled;
    cfg.alt_period = 2;
    auto s0 = m;
    gd_step(s0, data, cfg, 0);
    CHECK(testing::max_abs(s0.features() - m.features()) == 0.0);
    bool kernel_moved = false;
    for (std::size_t i = 0; i < m.kernel_params()->size(); ++i)
      kernel_moved |= s0.kernel_params()->values()[i] != m.kernel_params()->values()[i];
    CHECK(kernel_moved);
    auto s2 = m;
    gd_step(s2, data, cfg, 2);
    CHECK(testing::max_abs(s2.features() - m.features()) > 0.0);
    for (std::size_t i = 0; i < m.kernel_params()->size(); ++i)
      CHECK(s2.kernel_params()->values()[i] == m.kernel_params()->values()[i]);
  }

  TEST_CASE("trajectory matches the closed form") {
    std::mt19937_64 rng(5);
    for (auto v : {KernelVariant::Multilinear, KernelVariant::GaussianRbf, KernelVariant::MulFA}) {
      auto m = testing::simple_model(v, {12}, 6);
      const auto data = signal_1d(4, 10);
      TrainConfig cfg;
      cfg.steps = 300;
      cfg.snapshot_every = 50;
      cfg.record_outputs = true;
      const auto res = train(m, data, cfg);
      const auto g = gtk_compute(m, data.points);
      for (const auto& s : res.history.snapshots)
        CHECK(testing::max_abs(s.outputs - closed_form_outputs(g, data.targets, cfg.lr, s.step).outputs) <= 1e-8);
    }
  }

  TEST_CASE("feature-only loss decreases below the stability limit") {
    auto m = testing::mulfa_model({16}, 2);
    const auto data = signal_1d(5);
    const auto g = gtk_compute(m, data.points);
    TrainConfig cfg;
    cfg.lr = 1.9 / g.lambda_max();
    cfg.steps = 200;
    const auto res = train(m, data, cfg);
    for (std::size_t t = 1; t < res.history.loss.size(); ++t)
      CHECK(res.history.loss[t] <= res.history.loss[t - 1] * (1 + 1e-12));
  }

  TEST_CASE("divergence aborts") {
    auto m = testing::simple_model(KernelVariant::Multilinear, {4}, 1);
    const auto data = signal_1d(1, 30);
    TrainConfig cfg;
    cfg.lr = 50.0;
    cfg.steps = 5000;
    CHECK_THROWS_AS(train(m, data, cfg), DivergenceError);
  }

  TEST_CASE("config invariants") {
    TrainConfig cfg;
    cfg.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.alt_period = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("deterministic histories, including minibatch and adam") {
    auto m = testing::mulfa_model({10}, 3);
    const auto data = signal_1d(6);
    TrainConfig cfg;
    cfg.mode = TrainMode::Joint;
    cfg.batch_size = 16;
    cfg.optimizer = OptimizerKind::Adam;
    cfg.lr = 0.01;
    cfg.steps = 50;
    cfg.snapshot_every = 10;
    cfg.seed = 42;
    const auto a = train(m, data, cfg);
    const auto b = train(m, data, cfg);
    CHECK(history_csv(a.history) == history_csv(b.history));
    CHECK(a.history.loss == b.history.loss);
    cfg.seed = 43;
    const auto c = train(m, data, cfg);
    CHECK(c.history.loss != a.history.loss);
  }

  TEST_CASE("gradcheck") {
    std::mt19937_64 rng(10);
    auto ml = testing::simple_model(KernelVariant::Multilinear, {6, 6}, 1);
    ml.init_features_uniform(1.0, rng);
    const Dataset d2{testing::random_points(rng, 20, 2), testing::random_points(rng, 20, 1)};
    CHECK(gradcheck(ml, d2).features_rel_error <= 1e-9);

    auto mf = testing::mulfa_model({5, 5}, 2);
    mf.init_features_uniform(1.0, rng);
    const auto rep = gradcheck(mf, d2);
    CHECK(rep.has_kernel);
    CHECK(rep.features_rel_error <= 1e-9);
    CHECK(rep.kernel_rel_error <= 1e-5);

    // At an exact fit both gradients vanish.
    const Dataset exact{d2.points, evaluate(mf, d2.points)};
    const auto zero = gradcheck(mf, exact);
    CHECK(zero.features_abs_error <= 1e-9);
    CHECK(zero.kernel_abs_error <= 1e-9);
  }

  TEST_CASE("engine kernel gradient equals the reference path") {
    std::mt19937_64 rng(3);
    auto m = testing::mulfa_model({6, 5}, 11, 2);
    m.init_features_uniform(1.0, rng);
    const Dataset d{testing::random_points(rng, 30, 2), testing::random_points(rng, 30, 2)};
    TrainConfig cfg;
    cfg.mode = TrainMode::Joint;
    cfg.lr = 1e-3;
    cfg.lr_kernel = 1e-3;
    cfg.steps = 1;
    const auto res = train(m, d, cfg);
    const auto ref = loss_gradient(m, d);
    for (std::size_t i = 0; i < ref.kernel->size(); ++i) {
      const double moved = (m.kernel_params()->values()[i] - res.model.kernel_params()->values()[i]) / cfg.lr_kernel;
      CHECK(moved == doctest::Approx(ref.kernel->values()[i]).epsilon(1e-8).scale(1.0));
    }
    CHECK(testing::max_abs((m.features() - res.model.features()) / cfg.lr - ref.features) <= 1e-9);
  }
}
