#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "mfgrid/batch.hpp"
#include "mfgrid/errors.hpp"
#include "mfgrid/netpbm.hpp"
#include "mfgrid/sdf.hpp"
#include "mfgrid/tasks.hpp"

using namespace mfgrid;

TEST_SUITE("netpbm") {
  TEST_CASE("decode examples") {
    const std::string one = std::string("P5\n1 1\n255\n") + '\xff';
    const auto img = decode_netpbm(one);
    CHECK(img.height == 1);
    CHECK(img.data == std::vector<double>{1.0});
    const auto pts = pixel_coordinates(1, 1);
    CHECK(pts(0, 0) == 0.5);
    CHECK(pts(0, 1) == 0.5);

    std::string p6 = "P6\n2 2\n255\n";
    for (int v : {0, 85, 170, 255})
      for (int c = 0; c < 3; ++c) p6.push_back(static_cast<char>(v));
    const auto rgb = decode_netpbm(p6);
    CHECK(rgb.channels == 3);
    CHECK(rgb.at(0, 1, 2) == doctest::Approx(0.33333).epsilon(1e-5));
    CHECK(rgb.at(1, 0, 0) == doctest::Approx(0.66667).epsilon(1e-5));
    CHECK(rgb.at(1, 1, 1) == 1.0);

    const auto plain = decode_netpbm("P2\n# comment\n2 1\n255\n0 51\n");
    CHECK(plain.data[1] == doctest::Approx(0.2));
    const auto p3 = decode_netpbm("P3 1 1 255 255 0 51");
    CHECK(p3.data == std::vector<double>{1.0, 0.0, 0.2});
  }

  TEST_CASE("parse errors name the byte offset") {
    const auto offset_of = [](const std::string& s) -> long {
      try {
        decode_netpbm(s);
      } catch (const ParseError& e) {
        return static_cast<long>(e.offset());
      }
      return -1;
    };
    CHECK(offset_of("P5\n1 1\n65535\n\x01\x02") == 7);
    CHECK(offset_of("P5\n2 2\n255\n\x01") == 12);
    CHECK(offset_of("P4\n1 1\n") == 1);
    CHECK(offset_of("Q5") == 0);
    CHECK(offset_of("P2\n2 x\n") == 5);
    CHECK(offset_of("P2\n2 1\n255\n3") == 12);
    CHECK(offset_of("P2\n1 1\n255\n300\n") == 11);
  }

  TEST_CASE("8-bit round trip is exact") {
    Image img{3, 4, 3, {}};
    for (int i = 0; i < 36; ++i) img.data.push_back(static_cast<double>((i * 37) % 256) / 255.0);
    const auto back = decode_netpbm(encode_netpbm(img));
    CHECK(back.data == img.data);
    CHECK(encode_netpbm(back) == encode_netpbm(img));
    CHECK(quantize(-0.2) == 0);
    CHECK(quantize(1.7) == 255);
    CHECK(quantize(0.5) == 128);
  }
}

TEST_SUITE("tasks") {
  TEST_CASE("psnr") {
    RowMatrix a = RowMatrix::Zero(4, 1), b = RowMatrix::Ones(4, 1);
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, b) == doctest::Approx(0.0));
    RowMatrix c = RowMatrix::Constant(4, 1, 0.1);
    CHECK(psnr(a, c) == doctest::Approx(20.0));
    CHECK(psnr(a, RowMatrix::Constant(4, 1, 0.2)) < psnr(a, c));
    CHECK_THROWS_AS(psnr(a, RowMatrix::Zero(3, 1)), PreconditionError);
  }

  TEST_CASE("analytic sdf") {
    const Circle c{{0.5, 0.5}, 0.25};
    CHECK(analytic_sdf(c, std::vector<double>{0.5, 0.5}) == doctest::Approx(-0.25));
    CHECK(analytic_sdf(c, std::vector<double>{1.0, 0.5}) == doctest::Approx(0.25));
    const Box b{{0.5, 0.5}, {0.2, 0.1}};
    CHECK(analytic_sdf(b, std::vector<double>{0.5, 0.5}) == doctest::Approx(-0.1));
    CHECK(analytic_sdf(b, std::vector<double>{0.8, 0.7}) == doctest::Approx(std::hypot(0.1, 0.1)));
    const Torus t{{0.5, 0.5, 0.5}, 0.25, 0.1};
    CHECK(analytic_sdf(t, std::vector<double>{0.75, 0.5, 0.5}) == doctest::Approx(-0.1));
    for (const Shape& s : {Shape{c}, Shape{b}, Shape{Sphere{}}, Shape{t}}) {
      const auto surf = surface_samples(s, 50, 1);
      for (Eigen::Index i = 0; i < surf.rows(); ++i) CHECK(std::abs(analytic_sdf(s, row_of(surf, i))) <= 1e-12);
    }
  }

  TEST_CASE("shape validation") {
    CHECK_THROWS_AS(validate_shape(Circle{{0.5, 0.5}, -0.1}), ConfigError);
    CHECK_THROWS_AS(validate_shape(Circle{{0.1, 0.5}, 0.25}), ConfigError);
    CHECK_THROWS_AS(validate_shape(Torus{{0.5, 0.5, 0.5}, 0.1, 0.2}), ConfigError);
    CHECK_NOTHROW(validate_shape(Sphere{}));
  }

  TEST_CASE("iou") {
    const Circle c{};
    const ScalarField exact = [&](Point x) { return analytic_sdf(c, x); };
    CHECK(iou_metric(exact, c, 64).iou == 1.0);
    const ScalarField outside = [&](Point x) { return analytic_sdf(c, x) + 10.0; };
    CHECK(iou_metric(outside, c, 64).iou == 0.0);
    // Monotone zero-preserving transforms leave IoU unchanged.
    const ScalarField warped = [&](Point x) { const double v = analytic_sdf(c, x); return v * v * v + 3 * v; };
    const ScalarField shifted = [&](Point x) { return analytic_sdf(c, x) - 0.03; };
    const ScalarField shifted_warped = [&](Point x) { const double v = analytic_sdf(c, x) - 0.03; return std::atan(v); };
    CHECK(iou_metric(warped, c, 64).iou == 1.0);
    CHECK(iou_metric(shifted, c, 64).iou == iou_metric(shifted_warped, c, 64).iou);
    const auto empty = iou_metric(std::vector<double>{1, 2}, std::vector<double>{3, 4});
    CHECK(empty.empty_shape);
    CHECK(empty.iou == 1.0);
  }

  TEST_CASE("nae") {
    const Circle c{};
    const double step = 0.5 / 64;
    const ScalarField exact = [&](Point x) { return analytic_sdf(c, x); };
    const auto same = nae_metric(exact, c, 256, step);
    CHECK(same.degrees <= 0.5);
    CHECK(same.excluded == 0);
    const ScalarField flipped = [&](Point x) { return -analytic_sdf(c, x); };
    CHECK(nae_metric(flipped, c, 256, step).degrees == doctest::Approx(180.0).epsilon(1e-3));
    // Angular field around the centre: gradient tangent to the circle.
    const ScalarField rotated = [&](Point x) { return std::atan2(x[1] - 0.5, x[0] - 0.5); };
    CHECK(nae_metric(rotated, c, 100, step).degrees == doctest::Approx(90.0).epsilon(1e-3));
    const ScalarField flat = [](Point) { return 1.0; };
    const auto none = nae_metric(flat, c, 10, step);
    CHECK(none.excluded == 10);
    const Sphere s{};
    const ScalarField sphere = [&](Point x) { return analytic_sdf(s, x); };
    CHECK(nae_metric(sphere, s, 200, step).degrees <= 0.5);
  }

  TEST_CASE("image split is a fixed checker quarter") {
    ImageTask task{Image{4, 6, 1, std::vector<double>(24, 0.5)}, true};
    const auto split = image_split(task);
    CHECK(split.holdout.points.rows() == 6);
    CHECK(split.train.points.rows() == 18);
    CHECK(split.holdout.points(0, 0) == doctest::Approx(1.5 / 4));
    CHECK(split.holdout.points(0, 1) == doctest::Approx(1.5 / 6));
    task.image.data[3] = 1.5;
    CHECK_THROWS_AS(image_split(task), ConfigError);
  }

  TEST_CASE("constant image is fitted exactly") {
    ImageTask task{Image{8, 8, 1, std::vector<double>(64, 0.6)}, true};
    for (auto v : {KernelVariant::Multilinear, KernelVariant::GaussianRbf, KernelVariant::MulFA}) {
      ModelConfig mc;
      mc.geometry.resolution = {4};
      mc.kernel.variant = v;
      mc.kernel.d_f = 4;
      mc.kernel.d_h = 4;
      TrainConfig tc;
      tc.steps = 10;
      tc.lr = 0.05;
      tc.snapshot_every = 5;
      // From constant features the residual is exactly zero and stays so.
      GridModel m = build_model(mc, 2, 1, 0);
      m.features().setConstant(0.6);
      const auto split = image_split(task);
      tc.mode = TrainMode::Joint;
      const auto res = train(m, split.train, tc);
      // Exact up to the rounding of the normalized weights.
      CHECK(psnr(evaluate(res.model, split.train.points), split.train.targets) >= 250.0);
      CHECK(psnr(evaluate(res.model, split.holdout.points), split.holdout.targets) >= 250.0);
      tc.mode = TrainMode::FeaturesOnly;
      const auto fit = fit_image(task, mc, tc);
      CHECK(fit.metrics.size() == 3);
      CHECK(fit.final_metrics.psnr > fit.metrics.front().psnr);
    }
  }

  TEST_CASE("sdf dataset") {
    SdfTask task;
    task.samples = 101;
    const auto d = sdf_dataset(task, 3);
    CHECK(d.points.rows() == 101);
    for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
      CHECK(d.targets(i, 0) == analytic_sdf(task.shape, row_of(d.points, i)));
      CHECK(d.points(i, 0) >= 0.0);
      CHECK(d.points(i, 1) <= 1.0);
    }
    const auto again = sdf_dataset(task, 3);
    CHECK(testing::max_abs(again.points - d.points) == 0.0);
  }

  TEST_CASE("field export") {
    GridModel m(GridGeometry::regular({4, 4}), Multilinear{}, 1);
    m.features().setConstant(0.3);
    const auto f = export_field(m, 8);
    CHECK(f.extension == "pgm");
    const auto img = decode_netpbm(f.contents);
    for (double v : img.data) CHECK(v == img.data[0]);
    CHECK(f.sidecar_json.find("\"lo\"") != std::string::npos);

    std::mt19937_64 rng(1);
    m.init_features_uniform(1.0, rng);
    const auto g = export_field(m, 16, std::make_pair(-1.0, 1.0));
    const auto back = decode_netpbm(g.contents);
    CHECK(encode_netpbm(back) == g.contents);
    for (std::size_t i = 0; i < back.data.size(); ++i)
      CHECK(quantize((g.values[i] + 1.0) / 2.0) == quantize(back.data[i]));

    GridModel rgb(GridGeometry::regular({3, 3}), Multilinear{}, 3);
    CHECK(export_field(rgb, 4).extension == "ppm");
    GridModel vol(GridGeometry::regular({3, 3, 3}), Multilinear{}, 1);
    const auto csv = export_field(vol, 2);
    CHECK(csv.extension == "csv");
    CHECK(csv.contents.rfind("x,y,z,value\n", 0) == 0);
    CHECK(std::count(csv.contents.begin(), csv.contents.end(), '\n') == 9);
    CHECK_THROWS_AS(export_field(m, 1), ConfigError);
  }

  TEST_CASE("exported circle band has about one circumference of pixels") {
    const Circle c{};
    const ScalarField sdf = [&](Point x) { return analytic_sdf(c, x); };
    const auto f = export_field(sdf, 2, 64);
    std::size_t band = 0;
    for (double v : f.values) band += std::abs(v) <= 0.5 / 64;
    const double expected = 2 * std::numbers::pi * c.radius * 64;
    CHECK(std::abs(static_cast<double>(band) - expected) <= 0.1 * expected);
  }
}
