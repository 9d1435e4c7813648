#include "ifsd/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ifsd/box_ops.hpp"

namespace ifsd::eval {

std::vector<bool> match_detections(const std::vector<geometry::Box>& detections,
                                   const std::vector<geometry::Box>& gts, double iou_threshold) {
  std::vector<bool> flags(detections.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (size_t d = 0; d < detections.size(); ++d) {
    double best = iou_threshold;
    int best_gt = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = geometry::iou(detections[d], gts[g]);
      if (v >= best && (best_gt < 0 || v > best)) {
        best = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      taken[static_cast<size_t>(best_gt)] = true;
      flags[d] = true;
    }
  }
  return flags;
}

double average_precision(const std::vector<bool>& flags, int n_gt) {
  if (n_gt < 0) throw std::invalid_argument("average_precision: negative GT count");
  if (n_gt == 0 || flags.empty()) return 0.0;
  const size_t n = flags.size();
  std::vector<double> recall(n), precision(n);
  int tp = 0;
  for (size_t i = 0; i < n; ++i) {
    tp += flags[i] ? 1 : 0;
    recall[i] = static_cast<double>(tp) / n_gt;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (size_t i = n - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  size_t pos = 0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    while (pos < n && recall[pos] < level - 1e-12) ++pos;
    if (pos == n) break;
    sum += precision[pos];
  }
  return sum / 101.0;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

namespace {

double class_ap(const std::vector<const Detection*>& dets, const data::Dataset& dataset,
                int64_t label, int n_gt, double threshold) {
  // Detections are globally ranked; matching is per image in rank order.
  std::vector<std::vector<geometry::Box>> gts(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    for (const auto& g : dataset[i].gt) {
      if (g.label == label) gts[i].push_back(g.box);
    }
  }
  std::vector<std::vector<bool>> taken(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) taken[i].assign(gts[i].size(), false);
  std::vector<bool> flags;
  flags.reserve(dets.size());
  for (const Detection* d : dets) {
    auto& t = taken[d->image];
    const auto& g = gts[d->image];
    double best = threshold;
    int best_gt = -1;
    for (size_t k = 0; k < g.size(); ++k) {
      if (t[k]) continue;
      const double v = geometry::iou(d->box, g[k]);
      if (v >= best && (best_gt < 0 || v > best)) {
        best = v;
        best_gt = static_cast<int>(k);
      }
    }
    if (best_gt >= 0) t[static_cast<size_t>(best_gt)] = true;
    flags.push_back(best_gt >= 0);
  }
  return average_precision(flags, n_gt);
}

Aggregate aggregate(const std::map<int64_t, ClassResult>& per_class,
                    const std::vector<int64_t>& classes) {
  Aggregate a;
  for (const int64_t c : classes) {
    const auto it = per_class.find(c);
    if (it == per_class.end() || it->second.n_gt == 0) continue;
    a.ap += it->second.ap;
    a.ap50 += it->second.ap50;
    ++a.classes;
  }
  if (a.classes > 0) {
    a.ap /= a.classes;
    a.ap50 /= a.classes;
  }
  return a;
}

nlohmann::json aggregate_json(const Aggregate& a) {
  return {{"AP", 100.0 * a.ap}, {"AP50", 100.0 * a.ap50}, {"classes", a.classes}};
}

}  // namespace

nlohmann::json to_json(const EvalResult& result) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [c, r] : result.per_class) {
    per_class[std::to_string(c)] = {{"AP", 100.0 * r.ap}, {"AP50", 100.0 * r.ap50}, {"n_gt", r.n_gt}};
  }
  return {{"base", aggregate_json(result.base)},
          {"novel", aggregate_json(result.novel)},
          {"all", aggregate_json(result.all)},
          {"per_class", per_class}};
}

EvalResult evaluate_detections(const std::vector<Detection>& detections,
                               const data::Dataset& dataset, const data::SplitSpec& split) {
  EvalResult result;
  const auto thresholds = coco_iou_thresholds();
  for (const int64_t c : split.all()) {
    int n_gt = 0;
    for (const auto& s : dataset) {
      for (const auto& g : s.gt) n_gt += g.label == c ? 1 : 0;
    }
    std::vector<const Detection*> dets;
    for (const auto& d : detections) {
      if (d.label != c) continue;
      if (d.image >= dataset.size()) throw std::invalid_argument("evaluate: detection image out of range");
      dets.push_back(&d);
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection* a, const Detection* b) { return a->score > b->score; });
    ClassResult r;
    r.n_gt = n_gt;
    double sum = 0.0;
    for (const double t : thresholds) {
      const double ap = class_ap(dets, dataset, c, n_gt, t);
      if (t == 0.5) r.ap50 = ap;
      sum += ap;
    }
    r.ap = sum / static_cast<double>(thresholds.size());
    result.per_class[c] = r;
  }
  result.base = aggregate(result.per_class, split.base());
  result.novel = aggregate(result.per_class, split.novel());
  result.all = aggregate(result.per_class, split.all());
  return result;
}

std::vector<Detection> detect(model::Detector& model, const data::Dataset& dataset,
                              const data::SplitSpec& split, int batch_size) {
  if (batch_size <= 0) throw std::invalid_argument("detect: batch size must be positive");
  const auto classes = split.all();
  for (const int64_t c : classes) {
    if (c < 0 || c >= model->config().class_capacity() - 1) {
      throw std::invalid_argument("detect: class " + std::to_string(c) + " outside the model head");
    }
  }
  const auto idx = torch::tensor(classes, torch::kInt64);
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<Detection> out;
  for (size_t start = 0; start < dataset.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(dataset.size(), start + static_cast<size_t>(batch_size));
    std::vector<const RgbImage*> images;
    for (size_t i = start; i < end; ++i) images.push_back(&dataset[i].image);
    const auto output = model->forward(model::images_to_tensor(images));
    const auto probs = torch::sigmoid(output.logits.index_select(2, idx)).to(torch::kFloat64);
    const auto [score, arg] = probs.max(2);
    const auto boxes = output.boxes.to(torch::kFloat64).contiguous();
    const auto sc = score.contiguous();
    const auto ar = arg.contiguous();
    const int64_t m = sc.size(1);
    for (size_t i = start; i < end; ++i) {
      const int64_t b = static_cast<int64_t>(i - start);
      for (int64_t q = 0; q < m; ++q) {
        const double* bp = boxes.data_ptr<double>() + (b * m + q) * 4;
        out.push_back({i, classes[static_cast<size_t>(ar.data_ptr<int64_t>()[b * m + q])],
                       sc.data_ptr<double>()[b * m + q], geometry::Box{bp[0], bp[1], bp[2], bp[3]}});
      }
    }
  }
  if (was_training) model->train();
  return out;
}

EvalResult evaluate(model::Detector& model, const data::Dataset& dataset,
                    const data::SplitSpec& split, int batch_size) {
  return evaluate_detections(detect(model, dataset, split, batch_size), dataset, split);
}

}  // namespace ifsd::eval
