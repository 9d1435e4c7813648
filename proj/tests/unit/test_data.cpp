#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <algorithm>
#include <map>

#include "ifsd/data.hpp"
#include "ifsd/errors.hpp"

using namespace ifsd;
using namespace ifsd::data;
namespace fs = std::filesystem;

namespace {

const SplitSpec kSplit({0, 1, 2}, {3, 4});

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ifsd_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "annotations.json";
  std::ofstream(p) << text;
  return p;
}

const char* kMinimal = R"({
  "images": [{"id": 7, "file_name": "a.ppm", "width": 100, "height": 100}],
  "annotations": [{"id": 1, "image_id": 7, "category_id": 1, "bbox": [10, 10, 20, 40]}],
  "categories": [{"id": 1, "name": "square"}]
})";

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("split spec rejects overlap") {
    CHECK_THROWS_AS(SplitSpec({0, 1}, {1, 2}), std::invalid_argument);
    CHECK(kSplit.all() == std::vector<int64_t>{0, 1, 2, 3, 4});
    CHECK(kSplit.is_base(2));
    CHECK(kSplit.is_novel(4));
    CHECK_FALSE(kSplit.contains(5));
  }

  TEST_CASE("generator is deterministic and produces valid boxes") {
    const auto a = generate_shapes(5, 30, kSplit, kSplit.all());
    const auto b = generate_shapes(5, 30, kSplit, kSplit.all());
    CHECK((a == b));
    CHECK_FALSE((a == generate_shapes(6, 30, kSplit, kSplit.all())));
    for (const auto& s : a) {
      CHECK(s.image.width == 96);
      CHECK(s.gt.size() >= 1);
      CHECK(s.gt.size() <= 4);
      for (const auto& g : s.gt) {
        CHECK(g.box.valid());
        CHECK(kSplit.contains(g.label));
      }
    }
    CHECK_THROWS_AS(generate_shapes(1, 1, SplitSpec({0}, {9}), {9}), std::invalid_argument);
  }

  TEST_CASE("generated boxes are the tight extent of the rendered shape") {
    // One object per image. No pixel outside the box differs strongly from the
    // background, and each of the box's four border lines touches the shape.
    ShapesConfig cfg;
    cfg.max_objects = 1;
    const auto ds = generate_shapes(9, 20, kSplit, kSplit.all(), cfg);
    for (const auto& s : ds) {
      REQUIRE(s.gt.size() == 1);
      const auto& img = s.image;
      // Background colour: per-channel median, the shape covers a minority of pixels.
      float bg[3];
      for (int c = 0; c < 3; ++c) {
        std::vector<float> v;
        for (int y = 0; y < 96; ++y) {
          for (int x = 0; x < 96; ++x) v.push_back(img.at(x, y, c));
        }
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        bg[c] = v[v.size() / 2];
      }
      auto dist = [&](int x, int y) {
        float d = 0;
        for (int c = 0; c < 3; ++c) d += std::abs(img.at(x, y, c) - bg[c]);
        return d;
      };
      const auto p = geometry::to_pixels(s.gt[0].box, 96, 96);
      float outside = 0, top = 0, bottom = 0, left = 0, right = 0;
      for (int y = 0; y < 96; ++y) {
        for (int x = 0; x < 96; ++x) {
          const float d = dist(x, y);
          const bool in = x >= p.x1 && x < p.x2 && y >= p.y1 && y < p.y2;
          if (!in) outside = std::max(outside, d);
          if (!in) continue;
          if (y == p.y1) top = std::max(top, d);
          if (y == p.y2 - 1) bottom = std::max(bottom, d);
          if (x == p.x1) left = std::max(left, d);
          if (x == p.x2 - 1) right = std::max(right, d);
        }
      }
      CHECK(outside < 0.5f);
      CHECK(std::min({top, bottom, left, right}) > 0.45f);
    }
  }

  TEST_CASE("class histogram is close to uniform") {
    const auto ds = generate_shapes(21, 1000, kSplit, kSplit.all());
    std::map<int64_t, int> counts;
    int total = 0;
    for (const auto& s : ds) {
      for (const auto& g : s.gt) {
        ++counts[g.label];
        ++total;
      }
    }
    double chi2 = 0;
    for (int c = 0; c < 5; ++c) {
      const double e = total / 5.0;
      chi2 += (counts[c] - e) * (counts[c] - e) / e;
    }
    // 4 degrees of freedom: p > 0.01 <=> chi2 < 13.277.
    CHECK(chi2 < 13.277);
  }

  TEST_CASE("coco conversion worked value") {
    const auto dir = temp_dir("coco_min");
    const auto path = write_file(dir, kMinimal);
    const auto ds = load_coco_json(path, kSplit, {false});
    REQUIRE(ds.size() == 1);
    REQUIRE(ds[0].gt.size() == 1);
    const auto& b = ds[0].gt[0].box;
    CHECK(b.cx == doctest::Approx(0.20).epsilon(1e-12));
    CHECK(b.cy == doctest::Approx(0.30).epsilon(1e-12));
    CHECK(b.w == doctest::Approx(0.20).epsilon(1e-12));
    CHECK(b.h == doctest::Approx(0.40).epsilon(1e-12));
  }

  TEST_CASE("coco errors are distinct") {
    const auto dir = temp_dir("coco_err");
    CHECK_THROWS_AS(load_coco_json(write_file(dir, "{not json"), kSplit, {false}),
                    MalformedAnnotationError);
    CHECK_THROWS_AS(load_coco_json(write_file(dir, R"({"images": []})"), kSplit, {false}),
                    MalformedAnnotationError);
    std::string unknown = kMinimal;
    unknown.replace(unknown.find("\"category_id\": 1"), 16, "\"category_id\": 9");
    CHECK_THROWS_AS(load_coco_json(write_file(dir, unknown), kSplit, {false}), UnknownCategoryError);
    std::string zero = kMinimal;
    zero.replace(zero.find("[10, 10, 20, 40]"), 16, "[10, 10, 0, 40]");
    try {
      load_coco_json(write_file(dir, zero), kSplit, {false});
      FAIL("expected DegenerateBoxError");
    } catch (const DegenerateBoxError& e) {
      CHECK(std::string(e.what()).find("annotation 1") != std::string::npos);
    }
  }

  TEST_CASE("save and load round trip") {
    const auto dir = temp_dir("roundtrip");
    auto ds = generate_shapes(3, 6, kSplit, kSplit.all());
    ds[0].gt[0].supervised = false;
    save_coco_json(ds, dir);
    const auto back = load_coco_json(dir / "annotations.json", kSplit);
    REQUIRE(back.size() == ds.size());
    for (size_t i = 0; i < ds.size(); ++i) {
      CHECK(back[i].image == ds[i].image);
      CHECK(back[i].image_id == ds[i].image_id);
      REQUIRE(back[i].gt.size() == ds[i].gt.size());
      for (size_t k = 0; k < ds[i].gt.size(); ++k) {
        CHECK(back[i].gt[k].label == ds[i].gt[k].label);
        CHECK(back[i].gt[k].supervised == ds[i].gt[k].supervised);
        CHECK(back[i].gt[k].box.cx == doctest::Approx(ds[i].gt[k].box.cx).epsilon(1e-12));
        CHECK(back[i].gt[k].box.h == doctest::Approx(ds[i].gt[k].box.h).epsilon(1e-12));
      }
    }
    // Categories outside the split are dropped on load.
    const auto base_only = load_coco_json(dir / "annotations.json", SplitSpec({0, 1, 2}, {}), {false});
    for (const auto& s : base_only) {
      for (const auto& g : s.gt) CHECK(g.label <= 2);
    }
  }

  TEST_CASE("k-shot sampling") {
    const auto pool = generate_shapes(13, 300, kSplit, kSplit.all());
    CHECK(kshot_sample(pool, {3, 4}, 0, 1).empty());
    for (const int k : {1, 5, 10}) {
      const auto shots = kshot_sample(pool, {3, 4}, k, 77);
      const auto counts = supervised_counts(shots, 5);
      CHECK(counts[3] == k);
      CHECK(counts[4] == k);
      CHECK(counts[0] + counts[1] + counts[2] == 0);
      for (const auto& s : shots) {
        for (const auto& g : s.gt) CHECK((g.label == 3 || g.label == 4));
      }
      CHECK((shots == kshot_sample(pool, {3, 4}, k, 77)));
    }
    CHECK_THROWS_AS(kshot_sample(pool, {3, 4}, 10000, 1), InsufficientInstancesError);
  }

  TEST_CASE("k = 1 with one image per class selects exactly N images") {
    Dataset pool;
    for (int i = 0; i < 2; ++i) {
      DetectionSample s;
      s.image_id = i;
      s.gt = {{3 + i, {0.5, 0.5, 0.2, 0.2}, true}};
      pool.push_back(s);
    }
    CHECK(kshot_sample(pool, {3, 4}, 1, 0).size() == 2);
  }

  TEST_CASE("filter labels") {
    DetectionSample s;
    s.gt = {{0, {0.2, 0.2, 0.1, 0.1}, true}, {1, {0.5, 0.5, 0.1, 0.1}, true}, {3, {0.8, 0.8, 0.1, 0.1}, true}};
    s.image = RgbImage(4, 4, 0.5f);
    CHECK((filter_labels(s, {0, 1, 2, 3, 4}) == s));
    CHECK(filter_labels(s, {}).gt.empty());
    const auto n = filter_labels(s, {3, 4});
    REQUIRE(n.gt.size() == 1);
    CHECK(n.gt[0].label == 3);
    CHECK(n.image == s.image);
  }
}
