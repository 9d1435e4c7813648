#include "ifsd/distill.hpp"

#include <stdexcept>

#include "ifsd/box_ops.hpp"
#include "ifsd/losses.hpp"

namespace ifsd::distill {

PseudoBaseSet select_pseudo_base_gt(const torch::Tensor& logits, const torch::Tensor& boxes,
                                    const GroundTruthSet& novel_gt, const DistillOptions& options) {
  if (options.base_classes.empty()) {
    throw std::invalid_argument("select_pseudo_base_gt: no base classes");
  }
  const auto lg = logits.detach();
  const auto idx = torch::tensor(options.base_classes, torch::kInt64);
  const auto probs = torch::sigmoid(lg.index_select(1, idx)).to(torch::kFloat64).contiguous();
  const auto bx = boxes.detach().to(torch::kFloat64).contiguous();
  const int64_t m = lg.size(0);
  const int64_t nb = idx.size(0);
  const double* pp = probs.data_ptr<double>();
  const double* bp = bx.data_ptr<double>();

  PseudoBaseSet out;
  for (int64_t q = 0; q < m; ++q) {
    int64_t best = 0;
    for (int64_t k = 1; k < nb; ++k) {
      if (pp[q * nb + k] > pp[q * nb + best]) best = k;
    }
    if (!(pp[q * nb + best] > options.prob_threshold)) continue;
    const geometry::Box box{bp[4 * q], bp[4 * q + 1], bp[4 * q + 2], bp[4 * q + 3]};
    bool overlaps = false;
    for (const auto& g : novel_gt) {
      if (geometry::iou(box, g.box) > options.overlap_threshold) {
        overlaps = true;
        break;
      }
    }
    if (overlaps) continue;
    out.push_back({static_cast<int>(q), options.base_classes[static_cast<size_t>(best)], box, lg[q]});
  }
  return out;
}

torch::Tensor build_feature_mask(const GroundTruthSet& novel_gt, int h, int w) {
  if (h <= 0 || w <= 0) {
    throw std::invalid_argument("build_feature_mask: empty grid");
  }
  auto mask = torch::zeros({h, w}, torch::kFloat32);
  auto acc = mask.accessor<float, 2>();
  for (const auto& g : novel_gt) {
    const auto c = geometry::to_corner(g.box);
    for (int i = 0; i < h; ++i) {
      const double y = (i + 0.5) / h;
      if (y < c.y1 || y > c.y2) continue;
      for (int j = 0; j < w; ++j) {
        const double x = (j + 0.5) / w;
        if (x >= c.x1 && x <= c.x2) acc[i][j] = 1.0f;
      }
    }
  }
  return mask;
}

KdLosses kd_losses(const model::ModelOutput& student, const model::ModelOutput& teacher,
                   const std::vector<GroundTruthSet>& novel_gt, const DistillOptions& options) {
  const int64_t batch = student.logits.size(0);
  if (teacher.logits.sizes() != student.logits.sizes() ||
      teacher.features.sizes() != student.features.sizes() ||
      static_cast<int64_t>(novel_gt.size()) != batch) {
    throw std::invalid_argument("kd_losses: student, teacher and GT batches disagree");
  }
  const int h = static_cast<int>(student.features.size(2));
  const int w = static_cast<int>(student.features.size(3));
  std::vector<torch::Tensor> masks;
  masks.reserve(novel_gt.size());
  for (const auto& gt : novel_gt) masks.push_back(build_feature_mask(gt, h, w));
  KdLosses out;
  out.feat = losses::masked_feature_distill(student.features, teacher.features,
                                            torch::stack(masks).to(student.features.dtype()));

  std::vector<torch::Tensor> student_rows;
  std::vector<torch::Tensor> teacher_rows;
  for (int64_t b = 0; b < batch; ++b) {
    const auto pseudo = select_pseudo_base_gt(teacher.logits[b], teacher.boxes[b],
                                              novel_gt[static_cast<size_t>(b)], options);
    if (pseudo.empty()) continue;
    GroundTruthSet targets;
    targets.reserve(pseudo.size());
    for (const auto& p : pseudo) targets.push_back({p.label, p.box, true});
    const auto assignment = matcher::hungarian_solve(
        matcher::cost_matrix(targets, student.logits[b], student.boxes[b], options.weights));
    for (size_t i = 0; i < pseudo.size(); ++i) {
      student_rows.push_back(student.logits[b][assignment.slot_of_target[i]]);
      teacher_rows.push_back(pseudo[i].teacher_logits);
    }
  }
  out.pseudo_count = static_cast<int>(student_rows.size());
  if (student_rows.empty()) {
    out.cls = (student.logits * 0).sum();
  } else {
    out.cls = losses::kl_class_distill(torch::stack(student_rows), torch::stack(teacher_rows),
                                       options.base_classes);
  }
  return out;
}

}  // namespace ifsd::distill
