#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <vector>

#include "ifsd/geometry.hpp"

namespace ifsd::losses {

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// Class target of one query; std::nullopt is the no-object marker.
using ClassTarget = std::optional<int64_t>;

/// Elementwise binary focal terms for sigmoid logits against 0/1 targets of
/// the same shape. Callers mask and reduce.
torch::Tensor focal_terms(const torch::Tensor& logits, const torch::Tensor& targets,
                          FocalParams params = {});

/// Focal loss of one query: sum over classes of the binary focal terms, with
/// the positive term at `target` and negative terms everywhere else.
/// Throws std::invalid_argument on non-finite logits or out-of-range target.
torch::Tensor sigmoid_focal_loss(const torch::Tensor& logits, ClassTarget target,
                                 FocalParams params = {});

/// Sum over rows of w_l1 * |pred - target|_1 + w_giou * (1 - GIoU).
/// `pred` and `target` are [N, 4] (or [4]) center-form tensors.
torch::Tensor box_loss(const torch::Tensor& pred, const torch::Tensor& target, double w_l1,
                       double w_giou);
double box_loss(const geometry::Box& pred, const geometry::Box& target, double w_l1,
                double w_giou);

/// Masked feature imitation:
///   1 / (2 N) * sum_{i,j,k} (1 - mask_ij) (f_novel - f_base)^2,  N = sum (1 - mask_ij)
/// and 0 when N = 0. Accepts [C, H, W] features with an [H, W] mask, or a batch
/// [B, C, H, W] with [B, H, W] masks, in which case the per-image values are
/// averaged. `f_base` is treated as a constant.
torch::Tensor masked_feature_distill(const torch::Tensor& f_novel, const torch::Tensor& f_base,
                                     const torch::Tensor& mask);

/// KL(q_base || q_novel) where both distributions are softmaxes restricted to
/// `base_classes`. [C] inputs give one value; [P, C] inputs give the mean over
/// rows. `logits_base` is treated as a constant.
torch::Tensor kl_class_distill(const torch::Tensor& logits_novel,
                               const torch::Tensor& logits_base,
                               const std::vector<int64_t>& base_classes);

}  // namespace ifsd::losses
