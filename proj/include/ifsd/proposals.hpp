#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ifsd/geometry.hpp"
#include "ifsd/image.hpp"
#include "ifsd/matcher.hpp"

namespace ifsd::proposals {

inline constexpr int kColorBins = 25;
inline constexpr int kOrientationBins = 8;
inline constexpr int kColorHistSize = kColorBins * 3;
inline constexpr int kTextureHistSize = kOrientationBins * 3;

struct Region {
  std::vector<int> pixels;  // row-major pixel indices
  geometry::PixelBox bbox;
  int size = 0;
  std::array<float, kColorHistSize> color{};      // L1-normalized
  std::array<float, kTextureHistSize> texture{};  // L1-normalized
};

/// Over-segmentation of one image: a label per pixel and the regions it defines.
struct Segmentation {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<Region> regions;
};

struct SegmentationParams {
  double k = 150.0;    // scale of the merge threshold k / |C|, on a 0..255 colour scale
  int min_size = 20;   // components smaller than this are absorbed by a neighbour
  double sigma = 0.8;  // Gaussian pre-smoothing; 0 disables it
};

/// Graph-based segmentation (Felzenszwalb-Huttenlocher) on an 8-connected grid.
/// Regions are numbered in order of their first pixel in row-major order.
/// Throws std::invalid_argument on an empty image or k <= 0.
Segmentation oversegment(const RgbImage& image, const SegmentationParams& params = {});

struct RankedProposal {
  geometry::PixelBox box;
  double rank_key = 0.0;  // ascending = better
};

/// Similarity used for hierarchical grouping: colour + texture + size + fill,
/// each term in [0, 1].
double region_similarity(const Region& a, const Region& b, int image_pixels);

/// Greedy hierarchical grouping: repeatedly merges the most similar adjacent
/// pair until no adjacent pair is left, emitting every initial and merged
/// region. Each region's rank key is its hierarchy position (1 for the last
/// merge) times a uniform draw from `seed`; the output is sorted by rank key.
std::vector<RankedProposal> hierarchical_group(const Segmentation& segmentation,
                                               uint64_t seed = 0);

/// oversegment followed by hierarchical_group, with exact duplicate boxes
/// removed (the best-ranked copy stays).
std::vector<RankedProposal> selective_search(const RgbImage& image,
                                             const SegmentationParams& params = {},
                                             uint64_t seed = 0);

struct PruneOptions {
  int top_o = 10;
  double overlap_threshold = 0.2;
};

/// Walks the ranked list keeping proposals whose IoU with every real GT box is
/// <= overlap_threshold, stopping after top_o. Every kept entry carries
/// `pseudo_label`.
GroundTruthSet prune_to_pseudo_gt(const std::vector<RankedProposal>& ranked,
                                  const GroundTruthSet& gt, const PruneOptions& options,
                                  int64_t pseudo_label, int image_width, int image_height);

/// The reserved label for proposals given n classes in play (labels 0..n-1):
/// slot n, i.e. the one-based label n+1 written 0-based.
int64_t pseudo_label_index(int64_t n_classes_in_play);

}  // namespace ifsd::proposals
