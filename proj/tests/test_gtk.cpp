#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "mfgrid/errors.hpp"
#include "mfgrid/gtk.hpp"

using namespace mfgrid;

namespace {

GtkMatrix gtk_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix g(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) g(i, j++) = v;
    ++i;
  }
  return GtkMatrix(g);
}

RowMatrix col(std::initializer_list<double> v) {
  RowMatrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_SUITE("gtk") {
  TEST_CASE("two-point multilinear fixture") {
    const GridModel m(GridGeometry::regular({2}), Multilinear{}, 1);
    const auto g = gtk_compute(m, col({0.0, 0.5}));
    CHECK(g(0, 0) == doctest::Approx(1.0));
    CHECK(g(0, 1) == doctest::Approx(0.5));
    CHECK(g(1, 0) == doctest::Approx(0.5));
    CHECK(g(1, 1) == doctest::Approx(0.5));
    CHECK(gtk_compute(m, col({1.0})).matrix()(0, 0) == 1.0);
  }

  TEST_CASE("duplicated points give a rank-one kernel") {
    const auto m = testing::mulfa_model({6}, 2);
    const auto g = gtk_compute(m, col({0.37, 0.37}));
    CHECK(g(0, 0) == doctest::Approx(g(0, 1)));
    CHECK(g(1, 1) == doctest::Approx(g(0, 1)));
    CHECK(std::abs(g.lambda_min()) < 1e-12);
  }

  TEST_CASE("parallel, reference and dense Z agree; PSD and symmetric") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 10; ++t) {
      const auto v = static_cast<KernelVariant>(t % 3);
      const auto m = testing::simple_model(v, {7, 5}, static_cast<std::uint64_t>(t));
      const auto x = testing::random_points(rng, 40, 2);
      const auto g = gtk_compute(m, x);
      const auto ref = gtk_compute_reference(m, x);
      const Matrix z = gradient_matrix(m, x);
      CHECK((g.matrix() - ref.matrix()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((g.matrix() - z.transpose() * z).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(g.symmetry_residual() == 0.0);
      CHECK(g.psd_residual() <= 1e-12);
    }
  }

  TEST_CASE("closed form examples") {
    const auto g = gtk_of({{1, 0}, {0, 0.5}});
    const auto y = col({1, 1});
    auto r = closed_form_outputs(g, y, 0.1, 0);
    CHECK(testing::max_abs(r.outputs) == 0.0);
    r = closed_form_outputs(g, y, 0.1, 1);
    CHECK(r.outputs(0, 0) == doctest::Approx(0.1));
    CHECK(r.outputs(1, 0) == doctest::Approx(0.05));
    r = closed_form_outputs(g, y, 0.1, 10000);
    CHECK(testing::max_abs(r.outputs - y) <= 1e-6);
    CHECK_FALSE(r.divergent);
    CHECK(closed_form_outputs(g, y, 2.5, 3).divergent);
  }

  TEST_CASE("eigen closed form equals repeated multiplication") {
    std::mt19937_64 rng(1);
    const auto m = testing::mulfa_model({9}, 5);
    const auto x = testing::random_points(rng, 12, 1);
    const auto g = gtk_compute(m, x);
    const auto y = testing::random_points(rng, 12, 2, -1, 1);
    for (std::size_t t : {0u, 1u, 7u, 200u}) {
      const auto a = closed_form_outputs(g, y, 0.1, t).outputs;
      const auto b = closed_form_outputs_iterated(g, y, 0.1, t);
      CHECK(testing::max_abs(a - b) <= 1e-10);
    }
  }

  TEST_CASE("delta examples") {
    CHECK(generalization_delta(gtk_of({{1, 0}, {0, 1}}), col({1, 0}), 0.0).delta == doctest::Approx(1.0));
    const auto g = gtk_of({{1, 0.5}, {0.5, 0.5}});
    CHECK(generalization_delta(g, col({1, 1}), 0.0).delta == doctest::Approx(2.0));
    CHECK(generalization_delta(g, col({0, 0})).delta == 0.0);
    // Direct oracle: y^T G^-1 y with the hand inverse [[2,-2],[-2,4]].
    const double y1 = 0.3, y2 = -0.7;
    CHECK(generalization_delta(g, col({y1, y2}), 0.0).delta ==
          doctest::Approx(2 * y1 * y1 - 4 * y1 * y2 + 4 * y2 * y2));
    const auto singular = generalization_delta(gtk_of({{1, 1}, {1, 1}}), col({1, -1}));
    CHECK(singular.ill_conditioned);
    CHECK(std::isfinite(singular.delta));
    CHECK(singular.delta >= 0.0);
  }

  TEST_CASE("symmetric linspace") {
    const auto v = symmetric_linspace(-1.0, 1.0, 7);
    REQUIRE(v.size() == 7);
    CHECK(v.front() == -1.0);
    CHECK(v.back() == 1.0);
    for (std::size_t k = 0; k < v.size(); ++k) CHECK(v[v.size() - 1 - k] == -v[k]);
    CHECK(v[3] == 0.0);
  }

  TEST_CASE("bound map structure") {
    const auto a = testing::mulfa_model({8}, 3);
    const auto b = testing::simple_model(KernelVariant::Multilinear, {8}, 3);
    const auto pts = col({0.0, 0.5});
    const auto map = bound_difference_map(a, b, pts, -1.0, 1.0, 9);
    const auto same = bound_difference_map(a, a, pts, -1.0, 1.0, 9);
    const std::size_t n = map.resolution;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        CHECK(map.delta_a[r * n + c] >= 0.0);
        CHECK(map.delta_b[r * n + c] >= 0.0);
        CHECK(map.difference[r * n + c] == map.difference[(n - 1 - r) * n + (n - 1 - c)]);
        CHECK(same.difference[r * n + c] == 0.0);
      }
    CHECK_THROWS(bound_difference_map(a, b, col({0.1, 0.2, 0.3}), -1, 1, 4));
  }

  TEST_CASE("weight bound is tight for a node-aligned point") {
    GridModel m(GridGeometry::regular({3}), Multilinear{}, 1);
    const Dataset data{col({0.5}), col({0.8})};
    TrainConfig cfg;
    cfg.lr = 0.5;
    cfg.steps = 200;
    cfg.snapshot_every = 1;
    const auto res = train(m, data, cfg);
    const auto g = gtk_compute(m, data.points);
    const auto check = weight_change_bound_check(res.history, g, data.targets);
    CHECK(check.holds);
    CHECK(check.bound == doctest::Approx(0.8));
    CHECK(check.worst_margin <= 1e-6);
    CHECK(check.worst_margin >= -1e-6);
  }

  TEST_CASE("weight bound preconditions") {
    GridModel m(GridGeometry::regular({3}), Multilinear{}, 1);
    const Dataset data{col({0.5, 0.5}), col({0.8, 0.1})};
    TrainConfig cfg;
    cfg.steps = 5;
    const auto res = train(m, data, cfg);
    CHECK_THROWS_AS(weight_change_bound_check(res.history, gtk_compute(m, data.points), data.targets), PreconditionError);
  }
}
