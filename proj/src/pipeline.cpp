#include "ifsd/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ifsd/box_ops.hpp"
#include "ifsd/errors.hpp"
#include "ifsd/losses.hpp"

namespace ifsd::pipeline {

using nlohmann::json;

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kPretrain: return "PRETRAIN";
    case Phase::kBaseFt: return "BASE_FT";
    case Phase::kNovelFt: return "NOVEL_FT";
  }
  return "?";
}

Phase parse_phase(const std::string& name) {
  for (const Phase p : {Phase::kPretrain, Phase::kBaseFt, Phase::kNovelFt}) {
    if (name == phase_name(p)) return p;
  }
  throw ConfigError("unknown phase '" + name + "'");
}

PhaseConfig PhaseConfig::defaults(Phase phase) {
  PhaseConfig c;
  c.phase = phase;
  switch (phase) {
    case Phase::kPretrain:
      break;
    case Phase::kBaseFt:
      c.trainable = model::kClassSpecific;
      c.epochs = 1;
      c.lr_drop_epoch = -1;
      break;
    case Phase::kNovelFt:
      c.trainable = model::kClassSpecific;
      c.hflip = false;
      break;
  }
  return c;
}

void PhaseConfig::validate() const {
  const std::string p = phase_name(phase);
  if (epochs < 0) throw ConfigError(p + ": epochs must be >= 0");
  if (!(lr > 0.0)) throw ConfigError(p + ": lr must be positive");
  if (weight_decay < 0.0) throw ConfigError(p + ": weight_decay must be >= 0");
  if (!(lr_drop_factor > 0.0)) throw ConfigError(p + ": lr_drop_factor must be positive");
  if (lambda_pseudo < 0.0 || lambda_feat < 0.0 || lambda_cls < 0.0) {
    throw ConfigError(p + ": loss weights must be >= 0");
  }
  if (!(grad_clip > 0.0)) throw ConfigError(p + ": grad_clip must be positive");
  if (batch_size <= 0) throw ConfigError(p + ": batch_size must be positive");
}

void to_json(json& j, const PhaseConfig& c) {
  std::vector<std::string> groups;
  for (const auto g : c.trainable) groups.emplace_back(model::group_name(g));
  j = json{{"phase", phase_name(c.phase)},
           {"trainable", groups},
           {"epochs", c.epochs},
           {"lr", c.lr},
           {"weight_decay", c.weight_decay},
           {"lr_drop_epoch", c.lr_drop_epoch},
           {"lr_drop_factor", c.lr_drop_factor},
           {"lambda_pseudo", c.lambda_pseudo},
           {"lambda_feat", c.lambda_feat},
           {"lambda_cls", c.lambda_cls},
           {"grad_clip", c.grad_clip},
           {"batch_size", c.batch_size},
           {"hflip", c.hflip},
           {"seed", c.seed}};
}

void from_json(const json& j, PhaseConfig& c) {
  const Phase phase = j.contains("phase") ? parse_phase(j.at("phase").get<std::string>()) : c.phase;
  const PhaseConfig d = PhaseConfig::defaults(phase);
  c = d;
  if (j.contains("trainable")) {
    c.trainable.clear();
    for (const auto& g : j.at("trainable")) {
      try {
        c.trainable.insert(model::parse_group(g.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  c.epochs = j.value("epochs", d.epochs);
  c.lr = j.value("lr", d.lr);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.lr_drop_epoch = j.value("lr_drop_epoch", d.lr_drop_epoch);
  c.lr_drop_factor = j.value("lr_drop_factor", d.lr_drop_factor);
  c.lambda_pseudo = j.value("lambda_pseudo", d.lambda_pseudo);
  c.lambda_feat = j.value("lambda_feat", d.lambda_feat);
  c.lambda_cls = j.value("lambda_cls", d.lambda_cls);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.hflip = j.value("hflip", d.hflip);
  c.seed = j.value("seed", d.seed);
}

HungarianTerms hungarian_loss(const torch::Tensor& logits, const torch::Tensor& boxes,
                              const std::vector<GroundTruthSet>& targets,
                              const torch::Tensor& columns, const matcher::MatchWeights& weights) {
  const int64_t batch = logits.size(0);
  const int64_t m = logits.size(1);
  const int64_t c = logits.size(2);
  if (static_cast<int64_t>(targets.size()) != batch || boxes.size(0) != batch ||
      boxes.size(1) != m || columns.numel() != c) {
    throw std::invalid_argument("hungarian_loss: batch shapes disagree");
  }
  const auto col = columns.to(torch::kBool).contiguous();
  std::vector<bool> supervised_column(static_cast<size_t>(c));
  for (int64_t k = 0; k < c; ++k) supervised_column[static_cast<size_t>(k)] = col.data_ptr<bool>()[k];
  auto onehot = torch::zeros({batch, m, c}, torch::kFloat64);
  auto keep = torch::ones({batch, m}, torch::kFloat64);
  auto oh = onehot.accessor<double, 3>();
  auto kp = keep.accessor<double, 2>();
  std::vector<int64_t> pred_index;
  std::vector<geometry::Box> target_boxes;
  int num = 0;
  for (int64_t b = 0; b < batch; ++b) {
    const auto& gt = targets[static_cast<size_t>(b)];
    if (gt.empty()) continue;
    for (const auto& g : gt) {
      if (g.label < 0 || g.label >= c || !supervised_column[static_cast<size_t>(g.label)]) {
        throw std::invalid_argument("hungarian_loss: target label " + std::to_string(g.label) +
                                    " outside the supervised columns");
      }
    }
    const auto a = matcher::hungarian_solve(
        matcher::cost_matrix(gt, logits[b], boxes[b], weights));
    for (size_t i = 0; i < gt.size(); ++i) {
      const int q = a.slot_of_target[i];
      if (!gt[i].supervised) {
        kp[b][q] = 0.0;
        continue;
      }
      oh[b][q][gt[i].label] = 1.0;
      pred_index.push_back(b * m + q);
      target_boxes.push_back(gt[i].box);
      ++num;
    }
  }
  const double norm = std::max(num, 1);
  HungarianTerms out;
  out.num_targets = num;
  const auto focal = losses::focal_terms(logits, onehot.to(logits.dtype()), weights.focal);
  const auto mask = (keep.unsqueeze(-1) * col.to(torch::kFloat64).view({1, 1, c})).to(logits.dtype());
  out.cls = weights.cls * (focal * mask).sum() / norm;
  if (pred_index.empty()) {
    out.l1 = (boxes * 0).sum();
    out.giou = (boxes * 0).sum();
  } else {
    const auto pred = boxes.reshape({batch * m, 4}).index_select(
        0, torch::tensor(pred_index, torch::kInt64));
    const auto tgt = geometry::boxes_to_tensor(target_boxes, boxes.scalar_type());
    out.l1 = weights.l1 * (pred - tgt).abs().sum() / norm;
    out.giou = weights.giou * (1 - geometry::giou_rows(pred, tgt)).sum() / norm;
  }
  return out;
}

std::string format_record(const StepRecord& r) {
  std::ostringstream os;
  os.precision(6);
  os << phase_name(r.phase) << " epoch=" << r.epoch << " step=" << r.step << " lr=" << r.lr;
  for (const auto& [k, v] : r.components) os << ' ' << k << '=' << v;
  os << " total=" << r.total;
  if (r.pseudo_count > 0) os << " pseudo=" << r.pseudo_count;
  return os.str();
}

namespace {

struct StepOut {
  torch::Tensor total;
  std::map<std::string, double> components;
  std::map<std::string, double> weights;
  int pseudo_count = 0;
};

using StepFn = std::function<StepOut(const torch::Tensor& images,
                                     const std::vector<GroundTruthSet>& gt,
                                     const std::vector<GroundTruthSet>& pseudo)>;

GroundTruthSet flip_boxes(const GroundTruthSet& gt) {
  GroundTruthSet out = gt;
  for (auto& g : out) g.box.cx = 1.0 - g.box.cx;
  return out;
}

std::set<model::ParamGroup> frozen_groups(const std::set<model::ParamGroup>& trainable) {
  std::set<model::ParamGroup> out;
  for (const auto g : model::kAllGroups) {
    if (!trainable.contains(g)) out.insert(g);
  }
  return out;
}

void add_terms(StepOut& out, const std::string& prefix, const HungarianTerms& t, double w) {
  out.components[prefix + "cls"] = t.cls.item<double>();
  out.components[prefix + "l1"] = t.l1.item<double>();
  out.components[prefix + "giou"] = t.giou.item<double>();
  out.weights[prefix + "cls"] = w;
  out.weights[prefix + "l1"] = w;
  out.weights[prefix + "giou"] = w;
}

void check_phase(const PhaseConfig& cfg, Phase expected) {
  if (cfg.phase != expected) {
    throw ConfigError(std::string(phase_name(expected)) + ": received a " + phase_name(cfg.phase) +
                      " configuration");
  }
  cfg.validate();
}

torch::Tensor column_mask(int64_t capacity, int64_t excluded = -1, int64_t only = -1) {
  auto m = torch::ones({capacity}, torch::kBool);
  if (excluded >= 0) m[excluded] = false;
  if (only >= 0) {
    m.fill_(false);
    m[only] = true;
  }
  return m;
}

PhaseResult run_phase(model::Detector& model, const data::Dataset& dataset,
                      const std::vector<const GroundTruthSet*>& pseudo, const PhaseConfig& cfg,
                      const StepFn& step_fn, const LogFn& log) {
  PhaseResult result;
  result.phase = cfg.phase;
  model->set_trainable(cfg.trainable);
  model->train();
  const auto frozen = frozen_groups(cfg.trainable);
  result.frozen_hashes_before = model::parameter_hashes(model, frozen);

  const auto params = model->trainable_parameters();
  std::unique_ptr<torch::optim::AdamW> opt;
  if (!params.empty()) {
    opt = std::make_unique<torch::optim::AdamW>(
        params, torch::optim::AdamWOptions(cfg.lr).weight_decay(cfg.weight_decay));
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<size_t> order(dataset.size());
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs && !dataset.empty(); ++epoch) {
    const double lr =
        cfg.lr_drop_epoch >= 0 && epoch >= cfg.lr_drop_epoch ? cfg.lr * cfg.lr_drop_factor : cfg.lr;
    if (opt) {
      for (auto& group : opt->param_groups()) {
        static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
      }
    }
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<const RgbImage*> images;
      std::vector<GroundTruthSet> gt, ps;
      std::vector<int64_t> flipped;
      for (size_t k = start; k < end; ++k) {
        const auto& s = dataset[order[k]];
        result.images_read.insert(s.image_id);
        images.push_back(&s.image);
        const bool flip = cfg.hflip && (rng() & 1u);
        if (flip) flipped.push_back(static_cast<int64_t>(k - start));
        gt.push_back(flip ? flip_boxes(s.gt) : s.gt);
        const GroundTruthSet empty;
        const GroundTruthSet& p = pseudo.empty() ? empty : *pseudo[order[k]];
        ps.push_back(flip ? flip_boxes(p) : p);
      }
      auto batch = model::images_to_tensor(images);
      if (!flipped.empty()) {
        const auto idx = torch::tensor(flipped, torch::kInt64);
        batch.index_copy_(0, idx, batch.index_select(0, idx).flip({3}));
      }

      StepOut out = step_fn(batch, gt, ps);
      if (opt && out.total.requires_grad()) {
        opt->zero_grad();
        out.total.backward();
        torch::nn::utils::clip_grad_norm_(params, cfg.grad_clip);
        opt->step();
      }
      StepRecord rec;
      rec.phase = cfg.phase;
      rec.epoch = epoch;
      rec.step = step++;
      rec.lr = lr;
      rec.components = std::move(out.components);
      rec.weights = std::move(out.weights);
      rec.total = out.total.item<double>();
      rec.pseudo_count = out.pseudo_count;
      if (log) log(rec);
      result.log.push_back(std::move(rec));
    }
  }
  model->eval();
  result.frozen_hashes_after = model::parameter_hashes(model, frozen);
  if (result.frozen_hashes_after != result.frozen_hashes_before) {
    throw PhaseError(phase_name(cfg.phase), "a frozen parameter changed during training");
  }
  return result;
}

void require_labels(const data::Dataset& ds, const std::function<bool(int64_t)>& allowed,
                    Phase phase, const char* what) {
  for (const auto& s : ds) {
    for (const auto& g : s.gt) {
      if (!allowed(g.label)) {
        throw LabelContractError(std::string(phase_name(phase)) + ": image " +
                                 std::to_string(s.image_id) + " carries label " +
                                 std::to_string(g.label) + ", " + what);
      }
    }
  }
}

}  // namespace

PhaseResult pretrain_base(model::Detector& model, const data::Dataset& base,
                          const data::SplitSpec& split, const PhaseConfig& cfg, const LogFn& log) {
  check_phase(cfg, Phase::kPretrain);
  require_labels(base, [&](int64_t c) { return split.is_base(c); }, cfg.phase,
                 "only base labels are allowed");
  const auto columns = column_mask(model->config().class_capacity());
  const StepFn step = [&](const torch::Tensor& images, const std::vector<GroundTruthSet>& gt,
                          const std::vector<GroundTruthSet>&) {
    const auto out = model->forward(images);
    const auto hg = hungarian_loss(out.logits, out.boxes, gt, columns);
    StepOut s;
    s.total = hg.total();
    add_terms(s, "", hg, 1.0);
    return s;
  };
  return run_phase(model, base, {}, cfg, step, log);
}

PhaseResult finetune_base(model::Detector& model, const data::Dataset& base,
                          const PseudoSource& pseudo, const data::SplitSpec& split,
                          const PhaseConfig& cfg, const LogFn& log) {
  check_phase(cfg, Phase::kBaseFt);
  require_labels(base, [&](int64_t c) { return split.is_base(c); }, cfg.phase,
                 "only base labels are allowed");
  const int64_t capacity = model->config().class_capacity();
  const int64_t pseudo_label = capacity - 1;
  std::vector<const GroundTruthSet*> per_image;
  per_image.reserve(base.size());
  for (const auto& s : base) {
    const auto it = pseudo.find(s.image_id);
    if (it == pseudo.end()) {
      throw DataError(std::string(phase_name(cfg.phase)) + ": no pseudo annotations for image " +
                      std::to_string(s.image_id) + " (" + s.file_name + ")");
    }
    for (const auto& g : it->second) {
      if (g.label != pseudo_label) {
        throw LabelContractError(std::string(phase_name(cfg.phase)) + ": pseudo label " +
                                 std::to_string(g.label) + " on image " +
                                 std::to_string(s.image_id) + " is not the proposal slot " +
                                 std::to_string(pseudo_label));
      }
    }
    per_image.push_back(&it->second);
  }
  const auto real_columns = column_mask(capacity, pseudo_label);
  const auto pseudo_columns = column_mask(capacity, -1, pseudo_label);
  const StepFn step = [&](const torch::Tensor& images, const std::vector<GroundTruthSet>& gt,
                          const std::vector<GroundTruthSet>& ps) {
    const auto out = model->forward(images);
    const auto hg = hungarian_loss(out.logits, out.boxes, gt, real_columns);
    const auto hp = hungarian_loss(out.logits, out.boxes, ps, pseudo_columns);
    StepOut s;
    s.total = hg.total() + cfg.lambda_pseudo * hp.total();
    add_terms(s, "", hg, 1.0);
    add_terms(s, "pseudo_", hp, cfg.lambda_pseudo);
    s.pseudo_count = hp.num_targets;
    return s;
  };
  return run_phase(model, base, per_image, cfg, step, log);
}

NovelLoss novel_loss(model::Detector& student, model::Detector& teacher,
                     const torch::Tensor& images, const std::vector<GroundTruthSet>& targets,
                     const PhaseConfig& cfg, const distill::DistillOptions& kd) {
  const auto out = student->forward(images);
  model::ModelOutput t;
  {
    torch::NoGradGuard no_grad;
    t = teacher->forward(images);
  }
  NovelLoss l;
  l.hg = hungarian_loss(out.logits, out.boxes, targets,
                        column_mask(student->config().class_capacity()));
  l.kd = distill::kd_losses(out, t, targets, kd);
  l.total = l.hg.total() + cfg.lambda_feat * l.kd.feat + cfg.lambda_cls * l.kd.cls;
  return l;
}

PhaseResult finetune_novel(model::Detector& student, model::Detector& teacher,
                           const data::Dataset& novel, const data::SplitSpec& split,
                           const PhaseConfig& cfg, const distill::DistillOptions& kd,
                           const LogFn& log) {
  check_phase(cfg, Phase::kNovelFt);
  if (!(student->config() == teacher->config())) {
    throw PhaseError(phase_name(cfg.phase), "student and teacher configurations differ");
  }
  teacher->set_trainable({});
  teacher->eval();
  const uint64_t teacher_before = model::parameter_hash(teacher);
  const StepFn step = [&](const torch::Tensor& images, const std::vector<GroundTruthSet>& gt,
                          const std::vector<GroundTruthSet>&) {
    for (const auto& set : gt) {
      for (const auto& g : set) {
        if (!split.is_novel(g.label)) {
          throw LabelContractError(std::string(phase_name(cfg.phase)) + ": batch carries label " +
                                   std::to_string(g.label) + ", only novel labels are allowed");
        }
      }
    }
    const auto l = novel_loss(student, teacher, images, gt, cfg, kd);
    StepOut s;
    s.total = l.total;
    add_terms(s, "", l.hg, 1.0);
    s.components["feat_kd"] = l.kd.feat.item<double>();
    s.components["cls_kd"] = l.kd.cls.item<double>();
    s.weights["feat_kd"] = cfg.lambda_feat;
    s.weights["cls_kd"] = cfg.lambda_cls;
    s.pseudo_count = l.kd.pseudo_count;
    return s;
  };
  auto result = run_phase(student, novel, {}, cfg, step, log);
  result.teacher_hash_before = teacher_before;
  result.teacher_hash_after = model::parameter_hash(teacher);
  if (result.teacher_hash_after != teacher_before) {
    throw PhaseError(phase_name(cfg.phase), "the teacher model changed during training");
  }
  return result;
}

}  // namespace ifsd::pipeline
