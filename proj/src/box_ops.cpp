#include "ifsd/box_ops.hpp"

namespace ifsd::geometry {

torch::Tensor cxcywh_to_xyxy(const torch::Tensor& boxes) {
  const auto cx = boxes.select(-1, 0);
  const auto cy = boxes.select(-1, 1);
  const auto hw = boxes.select(-1, 2) * 0.5;
  const auto hh = boxes.select(-1, 3) * 0.5;
  return torch::stack({cx - hw, cy - hh, cx + hw, cy + hh}, -1);
}

namespace {

// Division that is 0 (with zero gradient) wherever the denominator is not
// positive.
torch::Tensor safe_ratio(const torch::Tensor& num, const torch::Tensor& den) {
  const auto ok = den > 0;
  const auto safe_den = torch::where(ok, den, torch::ones_like(den));
  return torch::where(ok, num / safe_den, torch::zeros_like(num));
}

torch::Tensor giou_xyxy(const torch::Tensor& a, const torch::Tensor& b) {
  const auto ax1 = a.select(-1, 0), ay1 = a.select(-1, 1);
  const auto ax2 = a.select(-1, 2), ay2 = a.select(-1, 3);
  const auto bx1 = b.select(-1, 0), by1 = b.select(-1, 1);
  const auto bx2 = b.select(-1, 2), by2 = b.select(-1, 3);

  const auto area_a = (ax2 - ax1) * (ay2 - ay1);
  const auto area_b = (bx2 - bx1) * (by2 - by1);
  const auto iw = (torch::minimum(ax2, bx2) - torch::maximum(ax1, bx1)).clamp_min(0);
  const auto ih = (torch::minimum(ay2, by2) - torch::maximum(ay1, by1)).clamp_min(0);
  const auto inter = iw * ih;
  const auto uni = area_a + area_b - inter;
  const auto ew = torch::maximum(ax2, bx2) - torch::minimum(ax1, bx1);
  const auto eh = torch::maximum(ay2, by2) - torch::minimum(ay1, by1);
  const auto enclosing = ew * eh;

  const auto iou = safe_ratio(inter, uni);
  const auto g = iou - safe_ratio(enclosing - uni, enclosing);
  return torch::where(enclosing > 0, g, torch::zeros_like(g));
}

}  // namespace

torch::Tensor giou_rows(const torch::Tensor& a, const torch::Tensor& b) {
  return giou_xyxy(cxcywh_to_xyxy(a), cxcywh_to_xyxy(b));
}

torch::Tensor giou_pairwise(const torch::Tensor& a, const torch::Tensor& b) {
  return giou_xyxy(cxcywh_to_xyxy(a).unsqueeze(1), cxcywh_to_xyxy(b).unsqueeze(0));
}

torch::Tensor boxes_to_tensor(const std::vector<Box>& boxes, torch::Dtype dtype) {
  auto out = torch::empty({static_cast<int64_t>(boxes.size()), 4}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  for (size_t i = 0; i < boxes.size(); ++i) {
    acc[i][0] = boxes[i].cx;
    acc[i][1] = boxes[i].cy;
    acc[i][2] = boxes[i].w;
    acc[i][3] = boxes[i].h;
  }
  return out.to(dtype);
}

Box box_from_tensor(const torch::Tensor& row) {
  const auto r = row.detach().to(torch::kFloat64).contiguous();
  const double* p = r.data_ptr<double>();
  return {p[0], p[1], p[2], p[3]};
}

}  // namespace ifsd::geometry
