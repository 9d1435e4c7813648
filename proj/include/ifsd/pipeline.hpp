#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ifsd/data.hpp"
#include "ifsd/distill.hpp"
#include "ifsd/matcher.hpp"
#include "ifsd/model.hpp"

namespace ifsd::pipeline {

enum class Phase { kPretrain, kBaseFt, kNovelFt };

const char* phase_name(Phase p);
Phase parse_phase(const std::string& name);

struct PhaseConfig {
  Phase phase = Phase::kPretrain;
  std::set<model::ParamGroup> trainable = model::kAllGroups;
  int epochs = 50;
  double lr = 2e-4;
  double weight_decay = 1e-4;
  int lr_drop_epoch = 40;  // epoch from which lr is multiplied by lr_drop_factor; < 0 never
  double lr_drop_factor = 0.1;
  double lambda_pseudo = 1.0;  // BASE_FT weight of the proposal term
  double lambda_feat = 0.1;
  double lambda_cls = 2.0;
  double grad_clip = 0.1;
  int batch_size = 16;
  bool hflip = true;
  uint64_t seed = 0;

  static PhaseConfig defaults(Phase phase);
  /// Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const PhaseConfig& c);
/// Missing keys take the defaults of the phase named by "phase" (or of `c.phase`).
void from_json(const nlohmann::json& j, PhaseConfig& c);

/// Weighted Hungarian-loss components of a batch, each already divided by the
/// number of supervised targets (at least 1).
struct HungarianTerms {
  torch::Tensor cls;
  torch::Tensor l1;
  torch::Tensor giou;
  int num_targets = 0;

  torch::Tensor total() const { return cls + l1 + giou; }
};

/// Set-prediction loss of a batch. Targets are matched per image with the
/// matcher's cost; the focal loss runs over the classes flagged in `columns`
/// (bool [C]) for every query, positive at the matched label. Queries matched
/// to unsupervised targets are excluded from every term.
HungarianTerms hungarian_loss(const torch::Tensor& logits, const torch::Tensor& boxes,
                              const std::vector<GroundTruthSet>& targets,
                              const torch::Tensor& columns,
                              const matcher::MatchWeights& weights = {});

/// One logged optimisation step.
struct StepRecord {
  Phase phase = Phase::kPretrain;
  int epoch = 0;
  int step = 0;
  double lr = 0.0;
  std::map<std::string, double> components;  // unweighted loss terms
  std::map<std::string, double> weights;     // multiplier of each component in the total
  double total = 0.0;
  int pseudo_count = 0;
};

std::string format_record(const StepRecord& r);

using LogFn = std::function<void(const StepRecord&)>;

struct PhaseResult {
  Phase phase = Phase::kPretrain;
  std::vector<StepRecord> log;
  std::map<std::string, uint64_t> frozen_hashes_before;
  std::map<std::string, uint64_t> frozen_hashes_after;
  uint64_t teacher_hash_before = 0;
  uint64_t teacher_hash_after = 0;
  std::set<int64_t> images_read;
};

/// Per-image pseudo ground truth keyed by image id.
using PseudoSource = std::map<int64_t, GroundTruthSet>;

/// Trains every group in `cfg.trainable` on base data with the Hungarian loss.
/// Throws LabelContractError if any GT carries a non-base label.
PhaseResult pretrain_base(model::Detector& model, const data::Dataset& base,
                          const data::SplitSpec& split, const PhaseConfig& cfg,
                          const LogFn& log = {});

/// Hungarian loss on base GT (proposal column excluded) plus lambda_pseudo
/// times the binary Hungarian loss on the proposal column against the pseudo
/// GT of each image. Throws DataError naming the image when `pseudo` lacks an
/// entry, PhaseError if a frozen tensor changed.
PhaseResult finetune_base(model::Detector& model, const data::Dataset& base,
                          const PseudoSource& pseudo, const data::SplitSpec& split,
                          const PhaseConfig& cfg, const LogFn& log = {});

/// Hungarian loss on the novel shots plus lambda_feat * feature distillation
/// plus lambda_cls * class distillation against `teacher`. Throws
/// LabelContractError if a batch carries a base label, PhaseError if a frozen
/// student tensor or the teacher changed.
PhaseResult finetune_novel(model::Detector& student, model::Detector& teacher,
                           const data::Dataset& novel, const data::SplitSpec& split,
                           const PhaseConfig& cfg, const distill::DistillOptions& kd,
                           const LogFn& log = {});

/// Loss terms of NOVEL_FT for one fixed batch, without an optimizer step.
struct NovelLoss {
  HungarianTerms hg;
  distill::KdLosses kd;
  torch::Tensor total;
};
NovelLoss novel_loss(model::Detector& student, model::Detector& teacher,
                     const torch::Tensor& images, const std::vector<GroundTruthSet>& targets,
                     const PhaseConfig& cfg, const distill::DistillOptions& kd);

}  // namespace ifsd::pipeline
