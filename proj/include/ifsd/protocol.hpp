#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include <json.hpp>

#include "ifsd/data.hpp"
#include "ifsd/distill.hpp"
#include "ifsd/model.hpp"
#include "ifsd/pipeline.hpp"
#include "ifsd/proposals.hpp"

namespace ifsd::pipeline {

struct DataSpec {
  int base_train_images = 2000;
  int novel_pool_images = 400;
  int test_images = 200;
  /// Shapes drawn in novel-pool images: "all" (base shapes appear unlabeled)
  /// or "novel".
  std::string novel_pool_classes = "all";
  data::ShapesConfig shapes;
  /// COCO-style files that replace the generator when non-empty.
  std::string base_train_json;
  std::string novel_pool_json;
  std::string test_json;
};

struct ExperimentConfig {
  data::SplitSpec split{{0, 1, 2}, {3, 4}};
  DataSpec data;
  model::ModelConfig model;
  int shots = 10;
  uint64_t seed = 0;
  proposals::PruneOptions prune;
  proposals::SegmentationParams segmentation;
  double prob_threshold = 0.5;
  PhaseConfig pretrain = PhaseConfig::defaults(Phase::kPretrain);
  PhaseConfig base_ft = PhaseConfig::defaults(Phase::kBaseFt);
  PhaseConfig novel_ft = PhaseConfig::defaults(Phase::kNovelFt);
  bool no_kd = false;
  bool no_selfsup = false;
  bool unfreeze_agnostic = false;
  std::filesystem::path output_dir = "out";
  int eval_batch = 50;

  /// Throws ConfigError.
  void validate() const;
  /// The phase settings actually used: ablation flags applied, seed derived
  /// from the experiment seed.
  PhaseConfig phase_config(Phase phase) const;
  distill::DistillOptions distill_options() const;
  /// Label of the proposal slot.
  int64_t pseudo_label() const { return model.class_capacity() - 1; }
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Reads and validates a config file. Throws ConfigError naming the path.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Seed of an independent stream derived from the experiment seed.
uint64_t derive_seed(uint64_t seed, uint64_t stream);

struct ExperimentData {
  data::Dataset base_train;  // base labels only
  data::Dataset novel_pool;  // all labels of the split
  data::Dataset novel_shots; // K-shot sample, novel labels only
  data::Dataset test;        // all labels of the split
};

ExperimentData prepare_data(const ExperimentConfig& cfg);

/// Selective search on every image, pruned against its GT.
PseudoSource generate_pseudo_gt(const data::Dataset& dataset, const ExperimentConfig& cfg);

/// COCO-style file of pseudo boxes (category id = proposal slot).
void save_pseudo_json(const PseudoSource& pseudo, const data::Dataset& dataset,
                      const std::filesystem::path& path, int64_t pseudo_label);
PseudoSource load_pseudo_json(const std::filesystem::path& path);

model::Detector make_model(const ExperimentConfig& cfg);

struct Hooks {
  LogFn log;
  std::function<void(const std::string&)> info;
};

/// PRETRAIN -> BASE_FT -> NOVEL_FT (BASE_FT skipped with no_selfsup), with an
/// evaluation on the test set after each phase. Checkpoints and report.json
/// are written to cfg.output_dir when it is non-empty. Any failure is rethrown
/// as a PhaseError naming the phase.
nlohmann::json run_protocol(const ExperimentConfig& cfg, const Hooks& hooks = {});

/// Base/Novel/All table of a report.
std::string render_report(const nlohmann::json& report);

}  // namespace ifsd::pipeline
