#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ifsd/image.hpp"
#include "ifsd/matcher.hpp"

namespace ifsd::data {

struct DetectionSample {
  int64_t image_id = 0;
  std::string file_name;
  RgbImage image;
  GroundTruthSet gt;

  friend bool operator==(const DetectionSample&, const DetectionSample&) = default;
};

using Dataset = std::vector<DetectionSample>;

/// Base and novel class ids. Construction rejects overlapping sets.
class SplitSpec {
 public:
  SplitSpec() = default;
  SplitSpec(std::vector<int64_t> base, std::vector<int64_t> novel);

  const std::vector<int64_t>& base() const { return base_; }
  const std::vector<int64_t>& novel() const { return novel_; }
  /// Base followed by novel ids.
  std::vector<int64_t> all() const;
  bool is_base(int64_t c) const;
  bool is_novel(int64_t c) const;
  bool contains(int64_t c) const { return is_base(c) || is_novel(c); }

 private:
  std::vector<int64_t> base_;
  std::vector<int64_t> novel_;
};

enum class Shape : int {
  kCircle = 0,
  kSquare,
  kTriangle,
  kCross,
  kRing,
  kDiamond,
  kStar,
  kBar,
};
inline constexpr int kPaletteSize = 8;
const char* shape_name(int64_t class_id);

struct ShapesConfig {
  int image_size = 96;
  int min_objects = 1;
  int max_objects = 4;
  double min_radius = 8.0;
  double max_radius = 18.0;
};

inline constexpr int kGeneratorVersion = 1;

/// Deterministic synthetic detection images: noisy background plus 1-4
/// non-overlapping solid shapes with tight boxes. Shapes are drawn uniformly
/// from `classes_in_play`, which must lie inside `split` and the palette.
/// Image ids start at `first_image_id`.
Dataset generate_shapes(uint64_t seed, int n_images, const SplitSpec& split,
                        const std::vector<int64_t>& classes_in_play,
                        const ShapesConfig& config = {}, int64_t first_image_id = 0);

/// Writes images as PPM files under `dir/images/` and the annotations as
/// `dir/annotations.json` (COCO layout, category id = class id, bbox in pixels).
void save_coco_json(const Dataset& dataset, const std::filesystem::path& dir);

struct LoadOptions {
  bool load_pixels = true;
};

/// Reads a COCO-style annotation file. Boxes are converted from corner-pixel
/// to normalized center form; annotations whose category is outside `split`
/// are dropped. Throws MalformedAnnotationError, UnknownCategoryError or
/// DegenerateBoxError (the latter naming the annotation id).
Dataset load_coco_json(const std::filesystem::path& path, const SplitSpec& split,
                       const LoadOptions& options = {});

/// Greedy K-shot selection over a seeded image order: an image is taken when
/// it holds an instance of a novel class still below K; instances beyond K in
/// a taken image stay in the sample but are marked unsupervised. Non-novel
/// labels are removed. Throws InsufficientInstancesError.
Dataset kshot_sample(const Dataset& dataset, const std::vector<int64_t>& novel_classes, int k,
                     uint64_t seed);

/// Drops GT entries whose label is not in `allowed`; the image is untouched.
DetectionSample filter_labels(const DetectionSample& sample, const std::set<int64_t>& allowed);
Dataset filter_labels(const Dataset& dataset, const std::set<int64_t>& allowed);

/// Number of supervised instances per class.
std::vector<int> supervised_counts(const Dataset& dataset, int num_classes);

}  // namespace ifsd::data
