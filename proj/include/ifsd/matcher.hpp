#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <span>
#include <vector>

#include "ifsd/geometry.hpp"
#include "ifsd/losses.hpp"

namespace ifsd {

/// One annotated object. Unsupervised entries (`supervised == false`) still
/// take part in matching but contribute no loss; this is how instances beyond
/// the K-shot budget are masked out.
struct GroundTruth {
  int64_t label = 0;
  geometry::Box box;
  bool supervised = true;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Real objects of one image. Padding to the query count with the no-object
/// marker is implicit.
using GroundTruthSet = std::vector<GroundTruth>;

}  // namespace ifsd

namespace ifsd::matcher {

/// Dense row-major cost matrix, rows = targets, cols = prediction slots.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

/// Injective map target index -> prediction slot, with its total cost.
struct Assignment {
  std::vector<int> slot_of_target;
  double total_cost = 0.0;
};

struct MatchWeights {
  double cls = 2.0;
  double l1 = 5.0;
  double giou = 2.0;
  losses::FocalParams focal;
};

/// Pairwise cost between one real target and one prediction: focal-style class
/// cost (positive minus negative focal term at the target index) plus
/// l1 * |b - b_hat|_1 + giou * (1 - GIoU).
double match_cost(int64_t target_label, const geometry::Box& target_box,
                  std::span<const double> pred_logits, const geometry::Box& pred_box,
                  const MatchWeights& weights = {});

/// Cost matrix between the targets and the M predictions of one image.
/// `logits` is [M, C], `boxes` is [M, 4]; both are read without gradient.
CostMatrix cost_matrix(const GroundTruthSet& targets, const torch::Tensor& logits,
                       const torch::Tensor& boxes, const MatchWeights& weights = {});

/// Exact minimum-cost assignment (Kuhn-Munkres with potentials, O(n^2 m)).
/// Requires rows <= cols; throws std::invalid_argument otherwise.
Assignment hungarian_solve(const CostMatrix& cost);

inline constexpr size_t kBruteForceMaxTargets = 8;

/// Exhaustive search over all injective maps. Test oracle; rows <= 8.
Assignment brute_force_solve(const CostMatrix& cost);

}  // namespace ifsd::matcher
