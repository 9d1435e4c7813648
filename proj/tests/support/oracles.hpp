#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond its value types.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "ifsd/geometry.hpp"
#include "ifsd/matcher.hpp"

namespace oracle {

struct Corners {
  double x1, y1, x2, y2;
};

inline Corners corners(const ifsd::geometry::Box& b) {
  return {b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2};
}

inline double overlap_1d(double a1, double a2, double b1, double b2) {
  return std::max(0.0, std::min(a2, b2) - std::max(a1, b1));
}

inline double iou(const ifsd::geometry::Box& a, const ifsd::geometry::Box& b) {
  const auto p = corners(a), q = corners(b);
  const double inter = overlap_1d(p.x1, p.x2, q.x1, q.x2) * overlap_1d(p.y1, p.y2, q.y1, q.y2);
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

inline double giou(const ifsd::geometry::Box& a, const ifsd::geometry::Box& b) {
  const auto p = corners(a), q = corners(b);
  const double inter = overlap_1d(p.x1, p.x2, q.x1, q.x2) * overlap_1d(p.y1, p.y2, q.y1, q.y2);
  const double uni = a.w * a.h + b.w * b.h - inter;
  const double hull = (std::max(p.x2, q.x2) - std::min(p.x1, q.x1)) *
                      (std::max(p.y2, q.y2) - std::min(p.y1, q.y1));
  if (hull <= 0) return 0.0;
  return (uni > 0 ? inter / uni : 0.0) - (hull - uni) / hull;
}

/// Minimum total cost over all injective maps rows -> cols, by enumerating
/// permutations of the columns.
inline double min_assignment_cost(const ifsd::matcher::CostMatrix& c) {
  const size_t n = c.rows(), m = c.cols();
  if (n == 0) return 0.0;
  std::vector<size_t> cols(m);
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += c(i, cols[i]);
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

/// Scalar re-evaluation of the matching cost.
inline double match_cost(int64_t label, const ifsd::geometry::Box& target,
                         const std::vector<double>& logits, const ifsd::geometry::Box& pred) {
  const double p = 1.0 / (1.0 + std::exp(-logits[static_cast<size_t>(label)]));
  const double pos = 0.25 * (1 - p) * (1 - p) * -std::log(p + 1e-8);
  const double neg = 0.75 * p * p * -std::log(1 - p + 1e-8);
  const double l1 = std::abs(pred.cx - target.cx) + std::abs(pred.cy - target.cy) +
                    std::abs(pred.w - target.w) + std::abs(pred.h - target.h);
  return 2 * (pos - neg) + 5 * l1 + 2 * (1 - oracle::giou(pred, target));
}

/// Relative error ||a - f|| / max(||a||, ||f||, floor) between an analytic
/// gradient and its central finite-difference estimate.
inline double gradient_rel_error(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                                 const torch::Tensor& x0, double step = 1e-6,
                                 double floor = 1e-10) {
  auto x = x0.detach().clone().to(torch::kFloat64).set_requires_grad(true);
  auto y = f(x);
  const auto analytic = torch::autograd::grad({y}, {x})[0].detach();
  auto numeric = torch::zeros_like(analytic);
  auto flat = x.detach().clone().reshape({-1});
  auto nflat = numeric.reshape({-1});
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double v = flat[i].item<double>();
    auto plus = flat.clone();
    plus[i] = v + step;
    auto minus = flat.clone();
    minus[i] = v - step;
    const double fp = f(plus.view(x.sizes())).item<double>();
    const double fm = f(minus.view(x.sizes())).item<double>();
    nflat[i] = (fp - fm) / (2 * step);
  }
  const double diff = (analytic - numeric).norm().item<double>();
  const double scale =
      std::max({analytic.norm().item<double>(), numeric.norm().item<double>(), floor});
  return diff / scale;
}

/// TP/FP flags by exhaustive search: for each detection in rank order, the
/// unmatched GT with the largest IoU >= threshold, found by scanning all GTs.
/// Written as an explicit state search over which GTs are consumed.
inline std::vector<bool> greedy_flags(const std::vector<ifsd::geometry::Box>& dets,
                                      const std::vector<ifsd::geometry::Box>& gts, double thr) {
  std::vector<bool> used(gts.size(), false), flags;
  for (const auto& d : dets) {
    std::vector<std::pair<double, size_t>> cands;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (!used[g] && oracle::iou(d, gts[g]) >= thr) cands.emplace_back(oracle::iou(d, gts[g]), g);
    }
    std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (cands.empty()) {
      flags.push_back(false);
    } else {
      used[cands.front().second] = true;
      flags.push_back(true);
    }
  }
  return flags;
}

/// 101-point interpolated AP written directly from the definition:
/// mean over r of max precision at recall >= r.
inline double ap101(const std::vector<bool>& flags, int n_gt) {
  if (n_gt == 0) return 0.0;
  std::vector<double> rec, prec;
  int tp = 0;
  for (size_t i = 0; i < flags.size(); ++i) {
    tp += flags[i];
    rec.push_back(double(tp) / n_gt);
    prec.push_back(double(tp) / double(i + 1));
  }
  double s = 0;
  for (int r = 0; r <= 100; ++r) {
    double best = 0;
    for (size_t i = 0; i < rec.size(); ++i) {
      if (rec[i] >= r / 100.0 - 1e-12) best = std::max(best, prec[i]);
    }
    s += best;
  }
  return s / 101;
}

inline ifsd::geometry::Box random_box(std::mt19937_64& rng, double min_side = 0.05) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w = min_side + u(rng) * (0.6 - min_side);
  const double h = min_side + u(rng) * (0.6 - min_side);
  const double cx = w / 2 + u(rng) * (1 - w);
  const double cy = h / 2 + u(rng) * (1 - h);
  return {cx, cy, w, h};
}

}  // namespace oracle
