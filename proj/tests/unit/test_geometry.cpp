#include <doctest.h>

#include <random>

#include "ifsd/box_ops.hpp"
#include "ifsd/geometry.hpp"
#include "support/oracles.hpp"

using namespace ifsd::geometry;

TEST_SUITE("geometry") {
  TEST_CASE("iou worked values") {
    const Box unit{0.5, 0.5, 1, 1};
    CHECK(iou(unit, unit) == doctest::Approx(1.0));
    CHECK(iou(CornerBox{0, 0, 0.5, 0.5}, CornerBox{0.5, 0.5, 1, 1}) == 0.0);
    // [0,0,1,1] vs [0.5,0,1.5,1]: intersection 0.5, union 1.5.
    CHECK(iou(CornerBox{0, 0, 1, 1}, CornerBox{0.5, 0, 1.5, 1}) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(iou(Box{0.3, 0.3, 0, 0}, Box{0.3, 0.3, 0, 0}) == 0.0);
  }

  TEST_CASE("giou worked values") {
    const GiouResult r = giou_checked(CornerBox{0, 0, 0.5, 0.5}, CornerBox{0.5, 0.5, 1, 1});
    CHECK_FALSE(r.degenerate);
    CHECK(std::abs(r.value + 0.5) <= 1e-9);
    CHECK(giou(Box{0.4, 0.6, 0.2, 0.3}, Box{0.4, 0.6, 0.2, 0.3}) == doctest::Approx(1.0));
    const GiouResult d = giou_checked(Box{0.2, 0.2, 0, 0}, Box{0.2, 0.2, 0, 0});
    CHECK(d.degenerate);
    CHECK(d.value == 0.0);
  }

  TEST_CASE("corner conversion") {
    CHECK(to_corner(Box{0.5, 0.5, 1, 1}) == CornerBox{0, 0, 1, 1});
    CHECK(to_corner(Box{0.5, 0.5, 0, 0}) == CornerBox{0.5, 0.5, 0.5, 0.5});
    CHECK_THROWS_AS(from_corner(CornerBox{0.6, 0, 0.5, 1}), std::invalid_argument);
    CHECK_THROWS_AS(from_corner(CornerBox{0, 0.6, 1, 0.5}), std::invalid_argument);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
      const Box b = oracle::random_box(rng, 0.0);
      const Box r = from_corner(to_corner(b));
      CHECK(std::abs(r.cx - b.cx) <= 1e-9);
      CHECK(std::abs(r.cy - b.cy) <= 1e-9);
      CHECK(std::abs(r.w - b.w) <= 1e-9);
      CHECK(std::abs(r.h - b.h) <= 1e-9);
    }
  }

  TEST_CASE("pixel conversion") {
    const Box b = from_pixels(PixelBox{10, 10, 30, 50}, 100, 100);
    CHECK(b.cx == doctest::Approx(0.20));
    CHECK(b.cy == doctest::Approx(0.30));
    CHECK(to_pixels(b, 100, 100) == PixelBox{10, 10, 30, 50});
  }

  TEST_CASE("properties against the oracle on random pairs") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
      const Box a = oracle::random_box(rng), b = oracle::random_box(rng);
      const double g = giou(a, b), u = iou(a, b);
      CHECK(u == doctest::Approx(oracle::iou(a, b)).epsilon(1e-12));
      CHECK(g == doctest::Approx(oracle::giou(a, b)).epsilon(1e-12));
      CHECK(g == giou(b, a));
      CHECK(u == iou(b, a));
      CHECK(g <= u + 1e-15);
      CHECK(g > -1.0);
      CHECK(g <= 1.0);
      CHECK(giou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("giou equals iou exactly when the hull is the union") {
    // Nested boxes: the hull is the outer box, which is the union.
    const Box outer{0.5, 0.5, 0.6, 0.6}, inner{0.5, 0.5, 0.2, 0.2};
    CHECK(giou(outer, inner) == doctest::Approx(iou(outer, inner)).epsilon(1e-12));
    // Side-by-side boxes leave a gap in the hull.
    CHECK(giou(Box{0.2, 0.5, 0.2, 0.2}, Box{0.8, 0.5, 0.2, 0.2}) < 0.0);
  }

  TEST_CASE("tensor giou agrees with scalar giou") {
    std::mt19937_64 rng(5);
    std::vector<Box> a, b;
    for (int i = 0; i < 50; ++i) {
      a.push_back(oracle::random_box(rng));
      b.push_back(oracle::random_box(rng));
    }
    const auto rows = giou_rows(boxes_to_tensor(a, torch::kFloat64), boxes_to_tensor(b, torch::kFloat64));
    const auto pair = giou_pairwise(boxes_to_tensor(a, torch::kFloat64), boxes_to_tensor(b, torch::kFloat64));
    for (int i = 0; i < 50; ++i) {
      CHECK(rows[i].item<double>() == doctest::Approx(giou(a[i], b[i])).epsilon(1e-12));
      CHECK(pair[i][(i + 7) % 50].item<double>() ==
            doctest::Approx(giou(a[i], b[(i + 7) % 50])).epsilon(1e-12));
    }
  }

  TEST_CASE("giou gradient matches finite differences") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 100; ++i) {
      const Box a = oracle::random_box(rng), b = oracle::random_box(rng);
      const auto x = torch::tensor({a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h}, torch::kFloat64);
      const auto f = [](const torch::Tensor& v) {
        return giou_rows(v.narrow(0, 0, 4).unsqueeze(0), v.narrow(0, 4, 4).unsqueeze(0)).sum();
      };
      CHECK(oracle::gradient_rel_error(f, x) <= 1e-4);
    }
  }

  TEST_CASE("degenerate tensor giou has finite zero gradient") {
    auto x = torch::tensor({{0.3, 0.3, 0.0, 0.0}}, torch::kFloat64).set_requires_grad(true);
    const auto g = giou_rows(x, x.detach().clone());
    g.sum().backward();
    CHECK(g.item<double>() == 0.0);
    CHECK(torch::isfinite(x.grad()).all().item<bool>());
  }
}
