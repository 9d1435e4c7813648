#include "ifsd/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ifsd/errors.hpp"

namespace ifsd::data {

using nlohmann::json;

SplitSpec::SplitSpec(std::vector<int64_t> base, std::vector<int64_t> novel)
    : base_(std::move(base)), novel_(std::move(novel)) {
  for (const int64_t b : base_) {
    if (b < 0) throw std::invalid_argument("SplitSpec: negative class id");
    if (std::find(novel_.begin(), novel_.end(), b) != novel_.end()) {
      throw std::invalid_argument("SplitSpec: class " + std::to_string(b) +
                                  " is both base and novel");
    }
  }
  for (const int64_t n : novel_) {
    if (n < 0) throw std::invalid_argument("SplitSpec: negative class id");
  }
}

std::vector<int64_t> SplitSpec::all() const {
  std::vector<int64_t> out = base_;
  out.insert(out.end(), novel_.begin(), novel_.end());
  return out;
}

bool SplitSpec::is_base(int64_t c) const {
  return std::find(base_.begin(), base_.end(), c) != base_.end();
}

bool SplitSpec::is_novel(int64_t c) const {
  return std::find(novel_.begin(), novel_.end(), c) != novel_.end();
}

const char* shape_name(int64_t class_id) {
  static constexpr const char* names[kPaletteSize] = {"circle", "square",  "triangle", "cross",
                                                      "ring",   "diamond", "star",     "bar"};
  if (class_id < 0 || class_id >= kPaletteSize) return "unknown";
  return names[class_id];
}

namespace {

// Portable draws on top of mt19937_64 (the standard distributions are
// implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi_inclusive) {
    const uint64_t span = static_cast<uint64_t>(hi_inclusive - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

bool inside(int64_t shape, double dx, double dy, double r) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  switch (static_cast<Shape>(shape)) {
    case Shape::kCircle:
      return dx * dx + dy * dy <= r * r;
    case Shape::kSquare:
      return ax <= 0.8 * r && ay <= 0.8 * r;
    case Shape::kTriangle:
      return dy <= 0.8 * r && dy >= -0.8 * r + 1.6 * ax;
    case Shape::kCross:
      return (ax <= 0.3 * r && ay <= r) || (ay <= 0.3 * r && ax <= r);
    case Shape::kRing: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.3025 * r * r;
    }
    case Shape::kDiamond:
      return ax + ay <= r;
    case Shape::kStar: {
      const double d = std::sqrt(dx * dx + dy * dy);
      const double theta = std::atan2(dy, dx);
      return d <= r * (0.6 + 0.4 * std::cos(5.0 * theta));
    }
    case Shape::kBar:
      return ax <= r && ay <= 0.35 * r;
  }
  return false;
}

float quantize(double v) {
  return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0);
}

DetectionSample render_one(Rng& rng, int64_t image_id, const std::vector<int64_t>& classes,
                           const ShapesConfig& cfg) {
  const int s = cfg.image_size;
  DetectionSample sample;
  sample.image_id = image_id;
  sample.image = RgbImage(s, s);
  double bg[3];
  for (double& c : bg) c = rng.uniform(0.2, 0.8);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      for (int c = 0; c < 3; ++c) sample.image.at(x, y, c) = quantize(bg[c] + 0.05 * rng.normal());
    }
  }

  std::vector<geometry::PixelBox> placed;
  const int n_objects = rng.integer(cfg.min_objects, cfg.max_objects);
  for (int k = 0; k < n_objects; ++k) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int64_t cls = classes[static_cast<size_t>(rng.integer(0, static_cast<int>(classes.size()) - 1))];
      const double r = rng.uniform(cfg.min_radius, cfg.max_radius);
      const double cx = rng.uniform(r, s - r);
      const double cy = rng.uniform(r, s - r);
      double col[3];
      do {
        for (double& c : col) c = rng.uniform(0.0, 1.0);
      } while (std::abs(col[0] - bg[0]) + std::abs(col[1] - bg[1]) + std::abs(col[2] - bg[2]) < 0.6);

      // Rasterize into a local mask first so rejected placements leave no trace.
      std::vector<std::pair<int, int>> pixels;
      geometry::PixelBox box{s, s, 0, 0};
      for (int y = std::max(0, static_cast<int>(cy - r) - 1); y < std::min(s, static_cast<int>(cy + r) + 2); ++y) {
        for (int x = std::max(0, static_cast<int>(cx - r) - 1); x < std::min(s, static_cast<int>(cx + r) + 2); ++x) {
          if (inside(cls, x + 0.5 - cx, y + 0.5 - cy, r)) {
            pixels.push_back({x, y});
            box.x1 = std::min(box.x1, x);
            box.y1 = std::min(box.y1, y);
            box.x2 = std::max(box.x2, x + 1);
            box.y2 = std::max(box.y2, y + 1);
          }
        }
      }
      if (pixels.empty()) continue;
      const bool clashes = std::any_of(placed.begin(), placed.end(), [&](const geometry::PixelBox& p) {
        return box.x1 < p.x2 + 2 && p.x1 < box.x2 + 2 && box.y1 < p.y2 + 2 && p.y1 < box.y2 + 2;
      });
      if (clashes) continue;
      for (const auto& [x, y] : pixels) {
        for (int c = 0; c < 3; ++c) sample.image.at(x, y, c) = quantize(col[c] + 0.03 * rng.normal());
      }
      placed.push_back(box);
      sample.gt.push_back({cls, geometry::from_pixels(box, s, s), true});
      break;
    }
  }
  return sample;
}

std::string image_file_name(int64_t id) {
  std::ostringstream os;
  os << "images/" << id << ".ppm";
  return os.str();
}

}  // namespace

Dataset generate_shapes(uint64_t seed, int n_images, const SplitSpec& split,
                        const std::vector<int64_t>& classes_in_play, const ShapesConfig& config,
                        int64_t first_image_id) {
  if (classes_in_play.empty()) {
    throw std::invalid_argument("generate_shapes: no classes in play");
  }
  for (const int64_t c : classes_in_play) {
    if (c < 0 || c >= kPaletteSize) {
      throw std::invalid_argument("generate_shapes: class " + std::to_string(c) +
                                  " exceeds the shape palette of " +
                                  std::to_string(kPaletteSize));
    }
    if (!split.contains(c)) {
      throw std::invalid_argument("generate_shapes: class " + std::to_string(c) +
                                  " is not in the split");
    }
  }
  Rng rng(seed);
  Dataset out;
  out.reserve(static_cast<size_t>(std::max(0, n_images)));
  for (int i = 0; i < n_images; ++i) {
    out.push_back(render_one(rng, first_image_id + i, classes_in_play, config));
    out.back().file_name = image_file_name(out.back().image_id);
  }
  return out;
}

void save_coco_json(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  json images = json::array();
  json annotations = json::array();
  std::set<int64_t> categories;
  int64_t ann_id = 1;
  for (const auto& s : dataset) {
    const std::string file = s.file_name.empty() ? image_file_name(s.image_id) : s.file_name;
    if (!s.image.empty()) write_ppm(dir / file, s.image);
    images.push_back({{"id", s.image_id},
                      {"file_name", file},
                      {"width", s.image.width},
                      {"height", s.image.height}});
    for (const auto& g : s.gt) {
      const auto c = geometry::to_corner(g.box);
      const double w = s.image.width, h = s.image.height;
      json a = {{"id", ann_id++},
                {"image_id", s.image_id},
                {"category_id", g.label},
                {"bbox", {c.x1 * w, c.y1 * h, (c.x2 - c.x1) * w, (c.y2 - c.y1) * h}},
                {"area", g.box.area() * w * h},
                {"iscrowd", 0}};
      if (!g.supervised) a["ignore"] = 1;
      annotations.push_back(std::move(a));
      categories.insert(g.label);
    }
  }
  json cats = json::array();
  for (const int64_t c : categories) cats.push_back({{"id", c}, {"name", shape_name(c)}});
  const json doc = {{"images", images}, {"annotations", annotations}, {"categories", cats}};
  std::ofstream out(dir / "annotations.json");
  if (!out) throw DataError("cannot write " + (dir / "annotations.json").string());
  out << doc.dump(1) << '\n';
}

Dataset load_coco_json(const std::filesystem::path& path, const SplitSpec& split,
                       const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw MalformedAnnotationError("cannot open annotation file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw MalformedAnnotationError(path.string() + ": " + e.what());
  }

  try {
    if (!doc.is_object() || !doc.contains("images") || !doc.contains("annotations") ||
        !doc.contains("categories")) {
      throw MalformedAnnotationError(path.string() +
                                     ": expected images, annotations and categories");
    }
    std::set<int64_t> known;
    for (const auto& c : doc.at("categories")) known.insert(c.at("id").get<int64_t>());

    Dataset out;
    std::map<int64_t, size_t> index_of;
    for (const auto& im : doc.at("images")) {
      DetectionSample s;
      s.image_id = im.at("id").get<int64_t>();
      s.file_name = im.at("file_name").get<std::string>();
      const int w = im.at("width").get<int>();
      const int h = im.at("height").get<int>();
      if (w <= 0 || h <= 0) {
        throw MalformedAnnotationError(path.string() + ": image " + std::to_string(s.image_id) +
                                       " has non-positive size");
      }
      if (options.load_pixels) {
        s.image = read_ppm(path.parent_path() / s.file_name);
        if (s.image.width != w || s.image.height != h) {
          throw MalformedAnnotationError("image " + s.file_name + " size differs from annotation");
        }
      } else {
        s.image.width = w;
        s.image.height = h;
      }
      if (!index_of.emplace(s.image_id, out.size()).second) {
        throw MalformedAnnotationError(path.string() + ": duplicate image id " +
                                       std::to_string(s.image_id));
      }
      out.push_back(std::move(s));
    }

    for (const auto& a : doc.at("annotations")) {
      const int64_t id = a.at("id").get<int64_t>();
      const int64_t image_id = a.at("image_id").get<int64_t>();
      const int64_t category = a.at("category_id").get<int64_t>();
      if (!known.contains(category)) {
        throw UnknownCategoryError(path.string() + ": annotation " + std::to_string(id) +
                                   " has unknown category id " + std::to_string(category));
      }
      const auto it = index_of.find(image_id);
      if (it == index_of.end()) {
        throw MalformedAnnotationError(path.string() + ": annotation " + std::to_string(id) +
                                       " refers to unknown image " + std::to_string(image_id));
      }
      const auto& bbox = a.at("bbox");
      if (!bbox.is_array() || bbox.size() != 4) {
        throw MalformedAnnotationError(path.string() + ": annotation " + std::to_string(id) +
                                       " bbox must have 4 numbers");
      }
      const double x = bbox[0].get<double>(), y = bbox[1].get<double>();
      const double bw = bbox[2].get<double>(), bh = bbox[3].get<double>();
      if (!(bw > 0.0) || !(bh > 0.0)) {
        throw DegenerateBoxError(path.string() + ": annotation " + std::to_string(id) +
                                 " has a degenerate box (width or height <= 0)");
      }
      if (!split.contains(category)) continue;
      DetectionSample& s = out[it->second];
      const double iw = s.image.width, ih = s.image.height;
      const geometry::CornerBox c{std::clamp(x / iw, 0.0, 1.0), std::clamp(y / ih, 0.0, 1.0),
                                  std::clamp((x + bw) / iw, 0.0, 1.0),
                                  std::clamp((y + bh) / ih, 0.0, 1.0)};
      if (!(c.x2 > c.x1) || !(c.y2 > c.y1)) {
        throw DegenerateBoxError(path.string() + ": annotation " + std::to_string(id) +
                                 " lies outside its image");
      }
      const bool ignored = a.contains("ignore") && a.at("ignore").get<int>() != 0;
      s.gt.push_back({category, geometry::from_corner(c), !ignored});
    }
    return out;
  } catch (const json::exception& e) {
    throw MalformedAnnotationError(path.string() + ": " + e.what());
  }
}

Dataset kshot_sample(const Dataset& dataset, const std::vector<int64_t>& novel_classes, int k,
                     uint64_t seed) {
  if (k < 0) throw std::invalid_argument("kshot_sample: K must be nonnegative");
  Dataset out;
  if (k == 0 || novel_classes.empty()) return out;

  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (size_t i = order.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.integer(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }

  std::map<int64_t, int> count;
  for (const int64_t c : novel_classes) count[c] = 0;
  auto complete = [&] {
    return std::all_of(count.begin(), count.end(), [&](const auto& kv) { return kv.second >= k; });
  };
  for (const size_t idx : order) {
    if (complete()) break;
    const auto& src = dataset[idx];
    const bool useful = std::any_of(src.gt.begin(), src.gt.end(), [&](const GroundTruth& g) {
      const auto it = count.find(g.label);
      return g.supervised && it != count.end() && it->second < k;
    });
    if (!useful) continue;
    DetectionSample s = src;
    s.gt.clear();
    for (const auto& g : src.gt) {
      const auto it = count.find(g.label);
      if (it == count.end()) continue;
      GroundTruth kept = g;
      if (g.supervised && it->second < k) {
        ++it->second;
      } else {
        kept.supervised = false;
      }
      s.gt.push_back(kept);
    }
    out.push_back(std::move(s));
  }
  for (const auto& [cls, n] : count) {
    if (n < k) {
      throw InsufficientInstancesError("kshot_sample: class " + std::to_string(cls) + " has only " +
                                       std::to_string(n) + " instances, need " + std::to_string(k));
    }
  }
  return out;
}

DetectionSample filter_labels(const DetectionSample& sample, const std::set<int64_t>& allowed) {
  DetectionSample out = sample;
  std::erase_if(out.gt, [&](const GroundTruth& g) { return !allowed.contains(g.label); });
  return out;
}

Dataset filter_labels(const Dataset& dataset, const std::set<int64_t>& allowed) {
  Dataset out;
  out.reserve(dataset.size());
  for (const auto& s : dataset) out.push_back(filter_labels(s, allowed));
  return out;
}

std::vector<int> supervised_counts(const Dataset& dataset, int num_classes) {
  std::vector<int> counts(static_cast<size_t>(num_classes), 0);
  for (const auto& s : dataset) {
    for (const auto& g : s.gt) {
      if (g.supervised && g.label >= 0 && g.label < num_classes) ++counts[static_cast<size_t>(g.label)];
    }
  }
  return counts;
}

}  // namespace ifsd::data
