#include "ifsd/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ifsd/box_ops.hpp"

namespace ifsd::losses {

torch::Tensor focal_terms(const torch::Tensor& logits, const torch::Tensor& targets,
                          FocalParams params) {
  const auto p = torch::sigmoid(logits);
  const auto ce = torch::binary_cross_entropy_with_logits(
      logits, targets, /*weight=*/{}, /*pos_weight=*/{}, at::Reduction::None);
  const auto p_t = p * targets + (1 - p) * (1 - targets);
  auto modulator = params.gamma == 0.0 ? torch::ones_like(p_t) : torch::pow(1 - p_t, params.gamma);
  const auto alpha_t = params.alpha * targets + (1 - params.alpha) * (1 - targets);
  return alpha_t * ce * modulator;
}

torch::Tensor sigmoid_focal_loss(const torch::Tensor& logits, ClassTarget target,
                                 FocalParams params) {
  if (logits.dim() != 1) {
    throw std::invalid_argument("sigmoid_focal_loss expects a 1-D logit vector");
  }
  if (!torch::isfinite(logits).all().item<bool>()) {
    throw std::invalid_argument("sigmoid_focal_loss: non-finite logits");
  }
  if (!(params.alpha > 0.0 && params.alpha < 1.0) || params.gamma < 0.0) {
    throw std::invalid_argument("sigmoid_focal_loss: alpha must be in (0,1), gamma >= 0");
  }
  auto targets = torch::zeros_like(logits);
  if (target) {
    if (*target < 0 || *target >= logits.size(0)) {
      throw std::invalid_argument("sigmoid_focal_loss: target class " + std::to_string(*target) +
                                  " outside logit range");
    }
    targets[*target] = 1.0;
  }
  return focal_terms(logits, targets, params).sum();
}

torch::Tensor box_loss(const torch::Tensor& pred, const torch::Tensor& target, double w_l1,
                       double w_giou) {
  if (w_l1 < 0.0 || w_giou < 0.0) {
    throw std::invalid_argument("box_loss: weights must be nonnegative");
  }
  const auto p = pred.dim() == 1 ? pred.unsqueeze(0) : pred;
  const auto t = target.dim() == 1 ? target.unsqueeze(0) : target;
  const auto l1 = (p - t).abs().sum();
  const auto g = (1 - geometry::giou_rows(p, t)).sum();
  return w_l1 * l1 + w_giou * g;
}

double box_loss(const geometry::Box& pred, const geometry::Box& target, double w_l1,
                double w_giou) {
  if (w_l1 < 0.0 || w_giou < 0.0) {
    throw std::invalid_argument("box_loss: weights must be nonnegative");
  }
  return w_l1 * geometry::l1_distance(pred, target) + w_giou * (1.0 - geometry::giou(pred, target));
}

namespace {

torch::Tensor masked_single(const torch::Tensor& f_novel, const torch::Tensor& f_base,
                            const torch::Tensor& mask) {
  const auto keep = (1 - mask).to(f_novel.dtype());
  const auto n = keep.sum();
  if (n.item<double>() <= 0.0) {
    return (f_novel * 0).sum();
  }
  const auto diff = f_novel - f_base.detach();
  return (keep.unsqueeze(0) * diff * diff).sum() / (2 * n);
}

}  // namespace

torch::Tensor masked_feature_distill(const torch::Tensor& f_novel, const torch::Tensor& f_base,
                                     const torch::Tensor& mask) {
  if (f_novel.sizes() != f_base.sizes()) {
    throw std::invalid_argument("masked_feature_distill: feature shapes differ");
  }
  if (f_novel.dim() == 3) {
    if (mask.dim() != 2 || mask.size(0) != f_novel.size(1) || mask.size(1) != f_novel.size(2)) {
      throw std::invalid_argument("masked_feature_distill: mask shape does not match features");
    }
    return masked_single(f_novel, f_base, mask);
  }
  if (f_novel.dim() == 4) {
    if (mask.dim() != 3 || mask.size(0) != f_novel.size(0) || mask.size(1) != f_novel.size(2) ||
        mask.size(2) != f_novel.size(3)) {
      throw std::invalid_argument("masked_feature_distill: mask shape does not match features");
    }
    std::vector<torch::Tensor> per_image;
    per_image.reserve(f_novel.size(0));
    for (int64_t b = 0; b < f_novel.size(0); ++b) {
      per_image.push_back(masked_single(f_novel[b], f_base[b], mask[b]));
    }
    return torch::stack(per_image).mean();
  }
  throw std::invalid_argument("masked_feature_distill: features must be 3-D or 4-D");
}

torch::Tensor kl_class_distill(const torch::Tensor& logits_novel,
                               const torch::Tensor& logits_base,
                               const std::vector<int64_t>& base_classes) {
  if (base_classes.empty()) {
    throw std::invalid_argument("kl_class_distill: empty base class set");
  }
  if (logits_novel.sizes() != logits_base.sizes()) {
    throw std::invalid_argument("kl_class_distill: logit shapes differ");
  }
  const int64_t capacity = logits_novel.size(-1);
  for (const int64_t c : base_classes) {
    if (c < 0 || c >= capacity) {
      throw std::invalid_argument("kl_class_distill: base class index out of range");
    }
  }
  const auto idx = torch::tensor(base_classes, torch::kInt64);
  const auto log_q_novel = torch::log_softmax(logits_novel.index_select(-1, idx), -1);
  const auto log_q_base = torch::log_softmax(logits_base.detach().index_select(-1, idx), -1);
  const auto kl = (log_q_base.exp() * (log_q_base - log_q_novel)).sum(-1);
  return logits_novel.dim() == 1 ? kl : kl.mean();
}

}  // namespace ifsd::losses
