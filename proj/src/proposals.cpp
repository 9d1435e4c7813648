#include "ifsd/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>

namespace ifsd::proposals {

namespace {

// ---------------------------------------------------------------------------
// Pre-smoothing

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Returns a separably smoothed copy scaled to 0..255.
std::vector<float> smooth(const RgbImage& image, double sigma) {
  const int w = image.width, h = image.height;
  std::vector<float> out(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), out.begin(),
                 [](float v) { return v * 255.0f; });
  if (sigma <= 0.0) return out;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<float> tmp(out.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (int i = -r; i <= r; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += k[i + r] * out[(static_cast<size_t>(y) * w + xx) * 3 + c];
        }
        tmp[(static_cast<size_t>(y) * w + x) * 3 + c] = acc;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (int i = -r; i <= r; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += k[i + r] * tmp[(static_cast<size_t>(yy) * w + x) * 3 + c];
        }
        out[(static_cast<size_t>(y) * w + x) * 3 + c] = acc;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Disjoint sets with the per-component merge threshold.

class Universe {
 public:
  explicit Universe(int n) : parent_(n), size_(n, 1) {
    for (int i = 0; i < n; ++i) parent_[i] = i;
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  int join(int a, int b) {
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }
  int size(int x) const { return size_[x]; }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
};

struct Edge {
  float weight;
  int a;
  int b;
};

// ---------------------------------------------------------------------------
// Region descriptors

void normalize(std::span<float> hist) {
  double sum = 0.0;
  for (float v : hist) sum += v;
  if (sum <= 0.0) {
    std::fill(hist.begin(), hist.end(), 1.0f / static_cast<float>(hist.size()));
    return;
  }
  for (float& v : hist) v = static_cast<float>(v / sum);
}

// Per-pixel orientation bin and magnitude for each channel, from central
// differences on the smoothed image.
struct Gradients {
  std::vector<int> bin;        // pixel * 3 + channel
  std::vector<float> magnitude;
};

Gradients gradients(const std::vector<float>& img, int w, int h) {
  Gradients g{std::vector<int>(img.size()), std::vector<float>(img.size())};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        auto px = [&](int xx, int yy) {
          xx = std::clamp(xx, 0, w - 1);
          yy = std::clamp(yy, 0, h - 1);
          return img[(static_cast<size_t>(yy) * w + xx) * 3 + c];
        };
        const float gx = 0.5f * (px(x + 1, y) - px(x - 1, y));
        const float gy = 0.5f * (px(x, y + 1) - px(x, y - 1));
        const size_t i = (static_cast<size_t>(y) * w + x) * 3 + c;
        g.magnitude[i] = std::sqrt(gx * gx + gy * gy);
        double angle = std::atan2(static_cast<double>(gy), static_cast<double>(gx));
        if (angle < 0) angle += 2.0 * std::numbers::pi;
        g.bin[i] = std::min(kOrientationBins - 1,
                            static_cast<int>(angle / (2.0 * std::numbers::pi) * kOrientationBins));
      }
    }
  }
  return g;
}

Region describe(std::vector<int> pixels, const RgbImage& image, const Gradients& grad) {
  Region r;
  r.size = static_cast<int>(pixels.size());
  int x1 = image.width, y1 = image.height, x2 = 0, y2 = 0;
  for (const int p : pixels) {
    const int x = p % image.width;
    const int y = p / image.width;
    x1 = std::min(x1, x);
    y1 = std::min(y1, y);
    x2 = std::max(x2, x + 1);
    y2 = std::max(y2, y + 1);
    for (int c = 0; c < 3; ++c) {
      const float v = image.pixels[static_cast<size_t>(p) * 3 + c];
      const int b = std::clamp(static_cast<int>(v * kColorBins), 0, kColorBins - 1);
      r.color[c * kColorBins + b] += 1.0f;
      const size_t gi = static_cast<size_t>(p) * 3 + c;
      r.texture[c * kOrientationBins + grad.bin[gi]] += grad.magnitude[gi];
    }
  }
  r.bbox = {x1, y1, x2, y2};
  normalize(r.color);
  normalize(r.texture);
  r.pixels = std::move(pixels);
  return r;
}

template <size_t N>
double intersection(const std::array<float, N>& a, const std::array<float, N>& b) {
  double s = 0.0;
  for (size_t i = 0; i < N; ++i) s += std::min(a[i], b[i]);
  return s;
}

geometry::PixelBox enclosing(const geometry::PixelBox& a, const geometry::PixelBox& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
          std::max(a.y2, b.y2)};
}

}  // namespace

Segmentation oversegment(const RgbImage& image, const SegmentationParams& params) {
  if (image.empty() || image.pixels.size() != static_cast<size_t>(image.width) * image.height * 3) {
    throw std::invalid_argument("oversegment: empty or malformed image");
  }
  if (!(params.k > 0.0)) {
    throw std::invalid_argument("oversegment: k must be positive");
  }
  const int w = image.width, h = image.height, n = w * h;
  const auto img = smooth(image, params.sigma);

  auto diff = [&](int a, int b) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = img[static_cast<size_t>(a) * 3 + c] - img[static_cast<size_t>(b) * 3 + c];
      s += d * d;
    }
    return static_cast<float>(std::sqrt(s));
  };

  std::vector<Edge> edges;
  edges.reserve(static_cast<size_t>(n) * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      if (x + 1 < w) edges.push_back({diff(p, p + 1), p, p + 1});
      if (y + 1 < h) edges.push_back({diff(p, p + w), p, p + w});
      if (x + 1 < w && y + 1 < h) edges.push_back({diff(p, p + w + 1), p, p + w + 1});
      if (x + 1 < w && y > 0) edges.push_back({diff(p, p - w + 1), p, p - w + 1});
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.weight < b.weight; });

  Universe u(n);
  std::vector<double> threshold(n, params.k);
  for (const Edge& e : edges) {
    int a = u.find(e.a);
    int b = u.find(e.b);
    if (a != b && e.weight <= threshold[a] && e.weight <= threshold[b]) {
      a = u.join(a, b);
      threshold[a] = e.weight + params.k / u.size(a);
    }
  }
  for (const Edge& e : edges) {
    const int a = u.find(e.a);
    const int b = u.find(e.b);
    if (a != b && (u.size(a) < params.min_size || u.size(b) < params.min_size)) {
      u.join(a, b);
    }
  }

  Segmentation seg{w, h, std::vector<int>(n, -1), {}};
  std::vector<int> id_of_root(n, -1);
  std::vector<std::vector<int>> members;
  for (int p = 0; p < n; ++p) {
    const int root = u.find(p);
    if (id_of_root[root] < 0) {
      id_of_root[root] = static_cast<int>(members.size());
      members.emplace_back();
    }
    seg.labels[p] = id_of_root[root];
    members[id_of_root[root]].push_back(p);
  }
  const auto grad = gradients(img, w, h);
  seg.regions.reserve(members.size());
  for (auto& m : members) {
    seg.regions.push_back(describe(std::move(m), image, grad));
  }
  return seg;
}

double region_similarity(const Region& a, const Region& b, int image_pixels) {
  const double im = image_pixels;
  const double colour = intersection(a.color, b.color);
  const double texture = intersection(a.texture, b.texture);
  const double size = 1.0 - (a.size + b.size) / im;
  const auto bb = enclosing(a.bbox, b.bbox);
  const double fill =
      1.0 - (static_cast<double>(bb.width()) * bb.height() - a.size - b.size) / im;
  return colour + texture + size + fill;
}

namespace {

struct Node {
  geometry::PixelBox bbox;
  int size = 0;
  std::array<float, kColorHistSize> color{};
  std::array<float, kTextureHistSize> texture{};
  bool alive = true;
};

// Portable uniform draw in [0, 1).
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<RankedProposal> hierarchical_group(const Segmentation& segmentation, uint64_t seed) {
  const int w = segmentation.width;
  const int h = segmentation.height;
  const int image_pixels = w * h;
  std::vector<Node> nodes;
  nodes.reserve(segmentation.regions.size() * 2);
  for (const Region& r : segmentation.regions) {
    nodes.push_back({r.bbox, r.size, r.color, r.texture, true});
  }
  auto as_region = [](const Node& n) {
    Region r;
    r.bbox = n.bbox;
    r.size = n.size;
    r.color = n.color;
    r.texture = n.texture;
    return r;
  };

  // Adjacency over the 8-neighbourhood, matching the segmentation graph.
  std::set<std::pair<int, int>> pairs;
  const auto& lab = segmentation.labels;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = lab[static_cast<size_t>(y) * w + x];
      auto link = [&](int xx, int yy) {
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) return;
        const int b = lab[static_cast<size_t>(yy) * w + xx];
        if (a != b) pairs.insert({std::min(a, b), std::max(a, b)});
      };
      link(x + 1, y);
      link(x, y + 1);
      link(x + 1, y + 1);
      link(x + 1, y - 1);
    }
  }

  std::vector<std::pair<double, std::pair<int, int>>> sims;
  auto similarity = [&](int a, int b) {
    return region_similarity(as_region(nodes[a]), as_region(nodes[b]), image_pixels);
  };
  for (const auto& p : pairs) sims.push_back({similarity(p.first, p.second), p});

  while (!sims.empty()) {
    // Most similar pair; ties go to the lexicographically smallest pair.
    auto best = sims.begin();
    for (auto it = sims.begin(); it != sims.end(); ++it) {
      if (it->first > best->first || (it->first == best->first && it->second < best->second)) {
        best = it;
      }
    }
    const auto [a, b] = best->second;
    Node merged;
    const Node& na = nodes[a];
    const Node& nb = nodes[b];
    merged.size = na.size + nb.size;
    merged.bbox = enclosing(na.bbox, nb.bbox);
    for (int i = 0; i < kColorHistSize; ++i) {
      merged.color[i] = (na.size * na.color[i] + nb.size * nb.color[i]) / merged.size;
    }
    for (int i = 0; i < kTextureHistSize; ++i) {
      merged.texture[i] = (na.size * na.texture[i] + nb.size * nb.texture[i]) / merged.size;
    }
    const int t = static_cast<int>(nodes.size());
    nodes.push_back(merged);
    nodes[a].alive = false;
    nodes[b].alive = false;

    std::set<int> neighbours;
    std::vector<std::pair<double, std::pair<int, int>>> kept;
    kept.reserve(sims.size());
    for (const auto& s : sims) {
      const auto [p, q] = s.second;
      const bool touches = p == a || p == b || q == a || q == b;
      if (!touches) {
        kept.push_back(s);
        continue;
      }
      const int other = (p == a || p == b) ? q : p;
      if (other != a && other != b) neighbours.insert(other);
    }
    for (const int nbh : neighbours) kept.push_back({similarity(nbh, t), {nbh, t}});
    sims = std::move(kept);
  }

  const int total = static_cast<int>(nodes.size());
  std::mt19937_64 rng(seed);
  std::vector<std::pair<double, int>> order;
  order.reserve(total);
  for (int i = 0; i < total; ++i) {
    const double position = total - i;
    order.push_back({position * uniform01(rng), i});
  }
  std::sort(order.begin(), order.end());
  std::vector<RankedProposal> out;
  out.reserve(total);
  for (const auto& [key, i] : order) out.push_back({nodes[i].bbox, key});
  return out;
}

std::vector<RankedProposal> selective_search(const RgbImage& image,
                                             const SegmentationParams& params, uint64_t seed) {
  auto ranked = hierarchical_group(oversegment(image, params), seed);
  // Identical boxes keep only their best-ranked copy.
  std::vector<RankedProposal> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) {
    const bool seen = std::any_of(out.begin(), out.end(),
                                  [&](const RankedProposal& o) { return o.box == r.box; });
    if (!seen) out.push_back(r);
  }
  return out;
}

GroundTruthSet prune_to_pseudo_gt(const std::vector<RankedProposal>& ranked,
                                  const GroundTruthSet& gt, const PruneOptions& options,
                                  int64_t pseudo_label, int image_width, int image_height) {
  GroundTruthSet out;
  if (options.top_o <= 0) return out;
  for (const auto& proposal : ranked) {
    const auto box = geometry::from_pixels(proposal.box, image_width, image_height);
    const bool clear = std::all_of(gt.begin(), gt.end(), [&](const GroundTruth& g) {
      return geometry::iou(box, g.box) <= options.overlap_threshold;
    });
    if (!clear) continue;
    out.push_back({pseudo_label, box, true});
    if (static_cast<int>(out.size()) >= options.top_o) break;
  }
  return out;
}

int64_t pseudo_label_index(int64_t n_classes_in_play) {
  if (n_classes_in_play < 1) {
    throw std::invalid_argument("pseudo_label_index: need at least one class in play");
  }
  return n_classes_in_play;
}

}  // namespace ifsd::proposals
