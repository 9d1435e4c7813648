#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "ifsd/data.hpp"
#include "ifsd/geometry.hpp"
#include "ifsd/model.hpp"

namespace ifsd::eval {

/// TP/FP flag per detection. `detections` must already be in descending score
/// order; each one takes the highest-IoU unmatched GT with IoU >= threshold.
std::vector<bool> match_detections(const std::vector<geometry::Box>& detections,
                                   const std::vector<geometry::Box>& gts, double iou_threshold);

/// 101-point interpolated average precision of a ranked TP/FP list.
/// Returns 0 when n_gt == 0.
double average_precision(const std::vector<bool>& flags, int n_gt);

struct Detection {
  size_t image = 0;  // index into the evaluated dataset
  int64_t label = 0;
  double score = 0.0;
  geometry::Box box;
};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

struct ClassResult {
  double ap = 0.0;
  double ap50 = 0.0;
  int n_gt = 0;
};

struct Aggregate {
  double ap = 0.0;
  double ap50 = 0.0;
  int classes = 0;  // classes with at least one GT that entered the mean
};

/// Fractions in [0, 1]; the JSON form reports percentages.
struct EvalResult {
  std::map<int64_t, ClassResult> per_class;
  Aggregate base;
  Aggregate novel;
  Aggregate all;
};

nlohmann::json to_json(const EvalResult& result);

/// AP per class over a dataset from explicit detections. Classes of `split`
/// without GT are reported but left out of the aggregates.
EvalResult evaluate_detections(const std::vector<Detection>& detections,
                               const data::Dataset& dataset, const data::SplitSpec& split);

/// One detection per query: label = argmax sigmoid over the split's classes,
/// score = that probability. The proposal slot never produces a detection.
std::vector<Detection> detect(model::Detector& model, const data::Dataset& dataset,
                              const data::SplitSpec& split, int batch_size = 50);

EvalResult evaluate(model::Detector& model, const data::Dataset& dataset,
                    const data::SplitSpec& split, int batch_size = 50);

}  // namespace ifsd::eval
