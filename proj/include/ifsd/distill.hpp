#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "ifsd/geometry.hpp"
#include "ifsd/matcher.hpp"
#include "ifsd/model.hpp"

namespace ifsd::distill {

struct DistillOptions {
  std::vector<int64_t> base_classes;
  double prob_threshold = 0.5;
  double overlap_threshold = 0.2;
  matcher::MatchWeights weights;
};

/// A confident teacher detection of a base class.
struct PseudoBase {
  int query = 0;
  int64_t label = 0;
  geometry::Box box;
  torch::Tensor teacher_logits;  // [C]
};
using PseudoBaseSet = std::vector<PseudoBase>;

/// Teacher queries of one image whose highest base-class sigmoid probability
/// exceeds the threshold and whose box has IoU <= overlap_threshold with every
/// novel GT box. `logits` is [M, C], `boxes` is [M, 4].
PseudoBaseSet select_pseudo_base_gt(const torch::Tensor& logits, const torch::Tensor& boxes,
                                    const GroundTruthSet& novel_gt, const DistillOptions& options);

/// [h, w] float mask, 1 where the cell centre lies inside (boundary included)
/// any GT box of `novel_gt`.
torch::Tensor build_feature_mask(const GroundTruthSet& novel_gt, int h, int w);

struct KdLosses {
  torch::Tensor feat;
  torch::Tensor cls;
  int pseudo_count = 0;
};

/// Both distillation terms for a batch. The feature term is the per-image
/// masked imitation loss averaged over images; the class term is the KL
/// averaged over every (pseudo GT, matched student query) pair in the batch,
/// 0 when no pseudo GT was selected.
KdLosses kd_losses(const model::ModelOutput& student, const model::ModelOutput& teacher,
                   const std::vector<GroundTruthSet>& novel_gt, const DistillOptions& options);

}  // namespace ifsd::distill
