#pragma once

// Differentiable tensor counterparts of the scalar box math in geometry.hpp.
// All tensors hold boxes along the last dimension (size 4).

#include <torch/torch.h>

#include <vector>

#include "ifsd/geometry.hpp"

namespace ifsd::geometry {

torch::Tensor cxcywh_to_xyxy(const torch::Tensor& boxes);

/// Row-wise GIoU of two [N, 4] center-form tensors. Degenerate rows (zero-area
/// enclosing box) yield 0 with zero gradient.
torch::Tensor giou_rows(const torch::Tensor& a, const torch::Tensor& b);

/// [N, 4] x [K, 4] -> [N, K] GIoU matrix.
torch::Tensor giou_pairwise(const torch::Tensor& a, const torch::Tensor& b);

torch::Tensor boxes_to_tensor(const std::vector<Box>& boxes,
                              torch::Dtype dtype = torch::kFloat32);
Box box_from_tensor(const torch::Tensor& row);

}  // namespace ifsd::geometry
