#include "ifsd/protocol.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ifsd/errors.hpp"
#include "ifsd/eval.hpp"

namespace ifsd::pipeline {

using nlohmann::json;

namespace {

enum Stream : uint64_t {
  kBaseData = 1,
  kNovelData = 2,
  kTestData = 3,
  kShots = 4,
  kModelInit = 5,
  kProposals = 6,
  kPhaseOrder = 10,
};

json split_json(const data::SplitSpec& s) { return {{"base", s.base()}, {"novel", s.novel()}}; }

}  // namespace

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  // splitmix64 finaliser over the pair.
  uint64_t z = seed * 0x9E3779B97F4A7C15ull + stream * 0xBF58476D1CE4E5B9ull + 0x94D049BB133111EBull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void ExperimentConfig::validate() const {
  if (split.base().empty() || split.novel().empty()) {
    throw ConfigError("split: base and novel class lists must be non-empty");
  }
  if (static_cast<int>(split.base().size()) != model.num_base ||
      static_cast<int>(split.novel().size()) != model.num_novel) {
    throw ConfigError("model: num_base/num_novel do not match the split");
  }
  for (const int64_t c : split.all()) {
    if (c < 0 || c >= model.num_base + model.num_novel) {
      throw ConfigError("split: class ids must be 0.." +
                        std::to_string(model.num_base + model.num_novel - 1));
    }
  }
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (model.image_size != data.shapes.image_size) {
    throw ConfigError("model.image_size differs from data.shapes.image_size");
  }
  if (shots < 0) throw ConfigError("shots must be >= 0");
  if (prune.top_o < 0) throw ConfigError("prune.top_o must be >= 0");
  if (prune.overlap_threshold < 0.0 || prune.overlap_threshold > 1.0) {
    throw ConfigError("prune.overlap_threshold must lie in [0, 1]");
  }
  if (data.novel_pool_classes != "all" && data.novel_pool_classes != "novel") {
    throw ConfigError("data.novel_pool_classes must be \"all\" or \"novel\"");
  }
  if (data.base_train_images < 0 || data.novel_pool_images < 0 || data.test_images < 0) {
    throw ConfigError("data: image counts must be >= 0");
  }
  for (const auto* p : {&data.base_train_json, &data.novel_pool_json, &data.test_json}) {
    if (!p->empty() && !std::filesystem::exists(*p)) {
      throw ConfigError("data: annotation file " + *p + " does not exist");
    }
  }
  if (eval_batch <= 0) throw ConfigError("eval_batch must be positive");
  if (pretrain.phase != Phase::kPretrain || base_ft.phase != Phase::kBaseFt ||
      novel_ft.phase != Phase::kNovelFt) {
    throw ConfigError("phase sections carry the wrong phase id");
  }
  pretrain.validate();
  base_ft.validate();
  novel_ft.validate();
}

PhaseConfig ExperimentConfig::phase_config(Phase phase) const {
  PhaseConfig c = phase == Phase::kPretrain ? pretrain : phase == Phase::kBaseFt ? base_ft : novel_ft;
  c.seed = derive_seed(seed ^ c.seed, kPhaseOrder + static_cast<uint64_t>(phase));
  if (phase == Phase::kNovelFt) {
    if (no_kd) {
      c.lambda_feat = 0.0;
      c.lambda_cls = 0.0;
    }
    if (unfreeze_agnostic) c.trainable = model::kAllGroups;
  }
  return c;
}

distill::DistillOptions ExperimentConfig::distill_options() const {
  distill::DistillOptions o;
  o.base_classes = split.base();
  o.prob_threshold = prob_threshold;
  o.overlap_threshold = prune.overlap_threshold;
  return o;
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"split", split_json(c.split)},
           {"data",
            {{"base_train_images", c.data.base_train_images},
             {"novel_pool_images", c.data.novel_pool_images},
             {"test_images", c.data.test_images},
             {"novel_pool_classes", c.data.novel_pool_classes},
             {"image_size", c.data.shapes.image_size},
             {"min_objects", c.data.shapes.min_objects},
             {"max_objects", c.data.shapes.max_objects},
             {"min_radius", c.data.shapes.min_radius},
             {"max_radius", c.data.shapes.max_radius},
             {"base_train_json", c.data.base_train_json},
             {"novel_pool_json", c.data.novel_pool_json},
             {"test_json", c.data.test_json}}},
           {"model", c.model},
           {"shots", c.shots},
           {"seed", c.seed},
           {"top_o", c.prune.top_o},
           {"overlap_threshold", c.prune.overlap_threshold},
           {"segmentation",
            {{"k", c.segmentation.k},
             {"min_size", c.segmentation.min_size},
             {"sigma", c.segmentation.sigma}}},
           {"prob_threshold", c.prob_threshold},
           {"pretrain", c.pretrain},
           {"base_ft", c.base_ft},
           {"novel_ft", c.novel_ft},
           {"no_kd", c.no_kd},
           {"no_selfsup", c.no_selfsup},
           {"unfreeze_agnostic", c.unfreeze_agnostic},
           {"output_dir", c.output_dir.string()},
           {"eval_batch", c.eval_batch}};
}

void from_json(const json& j, ExperimentConfig& c) {
  const ExperimentConfig d;
  c = d;
  if (j.contains("split")) {
    const auto& s = j.at("split");
    c.split = data::SplitSpec(s.at("base").get<std::vector<int64_t>>(),
                              s.at("novel").get<std::vector<int64_t>>());
  }
  if (j.contains("data")) {
    const auto& s = j.at("data");
    c.data.base_train_images = s.value("base_train_images", d.data.base_train_images);
    c.data.novel_pool_images = s.value("novel_pool_images", d.data.novel_pool_images);
    c.data.test_images = s.value("test_images", d.data.test_images);
    c.data.novel_pool_classes = s.value("novel_pool_classes", d.data.novel_pool_classes);
    c.data.shapes.image_size = s.value("image_size", d.data.shapes.image_size);
    c.data.shapes.min_objects = s.value("min_objects", d.data.shapes.min_objects);
    c.data.shapes.max_objects = s.value("max_objects", d.data.shapes.max_objects);
    c.data.shapes.min_radius = s.value("min_radius", d.data.shapes.min_radius);
    c.data.shapes.max_radius = s.value("max_radius", d.data.shapes.max_radius);
    c.data.base_train_json = s.value("base_train_json", d.data.base_train_json);
    c.data.novel_pool_json = s.value("novel_pool_json", d.data.novel_pool_json);
    c.data.test_json = s.value("test_json", d.data.test_json);
  }
  if (j.contains("model")) c.model = j.at("model").get<model::ModelConfig>();
  c.shots = j.value("shots", d.shots);
  c.seed = j.value("seed", d.seed);
  c.prune.top_o = j.value("top_o", d.prune.top_o);
  c.prune.overlap_threshold = j.value("overlap_threshold", d.prune.overlap_threshold);
  if (j.contains("segmentation")) {
    const auto& s = j.at("segmentation");
    c.segmentation.k = s.value("k", d.segmentation.k);
    c.segmentation.min_size = s.value("min_size", d.segmentation.min_size);
    c.segmentation.sigma = s.value("sigma", d.segmentation.sigma);
  }
  c.prob_threshold = j.value("prob_threshold", d.prob_threshold);
  auto phase = [&](const char* key, PhaseConfig& out) {
    if (!j.contains(key)) return;
    json section = j.at(key);
    if (!section.contains("phase")) section["phase"] = phase_name(out.phase);
    out = section.get<PhaseConfig>();
  };
  phase("pretrain", c.pretrain);
  phase("base_ft", c.base_ft);
  phase("novel_ft", c.novel_ft);
  c.no_kd = j.value("no_kd", d.no_kd);
  c.no_selfsup = j.value("no_selfsup", d.no_selfsup);
  c.unfreeze_agnostic = j.value("unfreeze_agnostic", d.unfreeze_agnostic);
  c.output_dir = j.value("output_dir", d.output_dir.string());
  c.eval_batch = j.value("eval_batch", d.eval_batch);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  ExperimentConfig cfg;
  try {
    cfg = json::parse(in).get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("invalid config file " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("invalid config file " + path.string() + ": " + e.what());
  }
  // Relative dataset paths are taken relative to the config file.
  for (auto* p : {&cfg.data.base_train_json, &cfg.data.novel_pool_json, &cfg.data.test_json}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) {
      *p = (path.parent_path() / *p).string();
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return cfg;
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  ExperimentData out;
  const auto all = cfg.split.all();
  const std::set<int64_t> base_set(cfg.split.base().begin(), cfg.split.base().end());
  const int64_t n = cfg.data.base_train_images;
  if (cfg.data.base_train_json.empty()) {
    out.base_train = data::filter_labels(
        data::generate_shapes(derive_seed(cfg.seed, kBaseData), cfg.data.base_train_images,
                              cfg.split, all, cfg.data.shapes, 0),
        base_set);
  } else {
    out.base_train = data::filter_labels(data::load_coco_json(cfg.data.base_train_json, cfg.split),
                                         base_set);
  }
  if (cfg.data.novel_pool_json.empty()) {
    const auto classes = cfg.data.novel_pool_classes == "novel" ? cfg.split.novel() : all;
    out.novel_pool = data::generate_shapes(derive_seed(cfg.seed, kNovelData),
                                           cfg.data.novel_pool_images, cfg.split, classes,
                                           cfg.data.shapes, 1000000 + n);
  } else {
    out.novel_pool = data::load_coco_json(cfg.data.novel_pool_json, cfg.split);
  }
  if (cfg.data.test_json.empty()) {
    out.test = data::generate_shapes(derive_seed(cfg.seed, kTestData), cfg.data.test_images,
                                     cfg.split, all, cfg.data.shapes, 2000000 + n);
  } else {
    out.test = data::load_coco_json(cfg.data.test_json, cfg.split);
  }
  out.novel_shots =
      data::kshot_sample(out.novel_pool, cfg.split.novel(), cfg.shots, derive_seed(cfg.seed, kShots));
  return out;
}

PseudoSource generate_pseudo_gt(const data::Dataset& dataset, const ExperimentConfig& cfg) {
  PseudoSource out;
  const uint64_t seed = derive_seed(cfg.seed, kProposals);
  for (const auto& s : dataset) {
    const auto ranked = proposals::selective_search(s.image, cfg.segmentation, seed);
    out[s.image_id] = proposals::prune_to_pseudo_gt(ranked, s.gt, cfg.prune, cfg.pseudo_label(),
                                                    s.image.width, s.image.height);
  }
  return out;
}

void save_pseudo_json(const PseudoSource& pseudo, const data::Dataset& dataset,
                      const std::filesystem::path& path, int64_t pseudo_label) {
  json images = json::array();
  json annotations = json::array();
  int64_t ann_id = 1;
  for (const auto& s : dataset) {
    const auto it = pseudo.find(s.image_id);
    if (it == pseudo.end()) continue;
    images.push_back({{"id", s.image_id},
                      {"file_name", s.file_name},
                      {"width", s.image.width},
                      {"height", s.image.height}});
    for (const auto& g : it->second) {
      const auto p = geometry::to_pixels(g.box, s.image.width, s.image.height);
      annotations.push_back({{"id", ann_id++},
                             {"image_id", s.image_id},
                             {"category_id", g.label},
                             {"bbox", {p.x1, p.y1, p.width(), p.height()}},
                             {"area", p.width() * p.height()},
                             {"iscrowd", 0}});
    }
  }
  const json doc{{"images", images},
                 {"annotations", annotations},
                 {"categories", json::array({{{"id", pseudo_label}, {"name", "proposal"}}})}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

PseudoSource load_pseudo_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pseudo annotation file " + path.string());
  PseudoSource out;
  try {
    const json doc = json::parse(in);
    std::map<int64_t, std::pair<int, int>> sizes;
    for (const auto& im : doc.at("images")) {
      const int64_t id = im.at("id").get<int64_t>();
      sizes[id] = {im.at("width").get<int>(), im.at("height").get<int>()};
      out[id];
    }
    for (const auto& a : doc.at("annotations")) {
      const int64_t id = a.at("image_id").get<int64_t>();
      const auto sz = sizes.find(id);
      if (sz == sizes.end()) {
        throw MalformedAnnotationError(path.string() + ": annotation for unknown image " +
                                       std::to_string(id));
      }
      const auto bb = a.at("bbox").get<std::vector<int>>();
      if (bb.size() != 4) throw MalformedAnnotationError(path.string() + ": bbox needs 4 values");
      const geometry::PixelBox p{bb[0], bb[1], bb[0] + bb[2], bb[1] + bb[3]};
      if (!p.valid_in(sz->second.first, sz->second.second)) {
        throw DegenerateBoxError(path.string() + ": invalid pseudo box in annotation " +
                                 std::to_string(a.at("id").get<int64_t>()));
      }
      out[id].push_back({a.at("category_id").get<int64_t>(),
                         geometry::from_pixels(p, sz->second.first, sz->second.second), true});
    }
  } catch (const json::exception& e) {
    throw MalformedAnnotationError(path.string() + ": " + e.what());
  }
  return out;
}

model::Detector make_model(const ExperimentConfig& cfg) {
  return model::Detector(cfg.model, derive_seed(cfg.seed, kModelInit));
}

namespace {

json phase_entry(Phase phase, const PhaseResult* result, const eval::EvalResult& ev,
                 const std::string& checkpoint) {
  json e{{"phase", phase_name(phase)}, {"eval", eval::to_json(ev)}, {"checkpoint", checkpoint}};
  if (result != nullptr) {
    e["steps"] = result->log.size();
    e["final_total_loss"] = result->log.empty() ? 0.0 : result->log.back().total;
    e["frozen_tensors_checked"] = result->frozen_hashes_before.size();
    e["images_read"] = result->images_read.size();
  }
  return e;
}

template <typename F>
auto tagged(Phase phase, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PhaseError&) {
    throw;
  } catch (const std::exception& e) {
    throw PhaseError(phase_name(phase), e.what());
  }
}

}  // namespace

json run_protocol(const ExperimentConfig& cfg, const Hooks& hooks) {
  cfg.validate();
  auto info = [&](const std::string& m) {
    if (hooks.info) hooks.info(m);
  };
  const bool write = !cfg.output_dir.empty();
  if (write) std::filesystem::create_directories(cfg.output_dir);

  info("preparing data");
  const ExperimentData data = tagged(Phase::kPretrain, [&] { return prepare_data(cfg); });
  info("base images " + std::to_string(data.base_train.size()) + ", novel shots " +
       std::to_string(data.novel_shots.size()) + ", test images " + std::to_string(data.test.size()));

  json report{{"seed", cfg.seed},
              {"shots", cfg.shots},
              {"split", split_json(cfg.split)},
              {"flags",
               {{"no_kd", cfg.no_kd},
                {"no_selfsup", cfg.no_selfsup},
                {"unfreeze_agnostic", cfg.unfreeze_agnostic}}},
              {"phases", json::array()}};

  auto ckpt = [&](const char* name) { return write ? (cfg.output_dir / name).string() : ""; };
  auto evaluate = [&](Phase phase, model::Detector& m) {
    return tagged(phase, [&] { return eval::evaluate(m, data.test, cfg.split, cfg.eval_batch); });
  };

  model::Detector model = make_model(cfg);
  {
    info("PRETRAIN");
    const auto pc = cfg.phase_config(Phase::kPretrain);
    const auto r = tagged(Phase::kPretrain,
                          [&] { return pretrain_base(model, data.base_train, cfg.split, pc, hooks.log); });
    if (write) tagged(Phase::kPretrain, [&] { model::save_checkpoint(model, ckpt("pretrain.ckpt")); });
    report["phases"].push_back(
        phase_entry(Phase::kPretrain, &r, evaluate(Phase::kPretrain, model), write ? "pretrain.ckpt" : ""));
  }
  if (!cfg.no_selfsup) {
    info("BASE_FT: generating proposals");
    const auto pseudo = tagged(Phase::kBaseFt, [&] { return generate_pseudo_gt(data.base_train, cfg); });
    size_t count = 0;
    for (const auto& [id, set] : pseudo) count += set.size();
    info("BASE_FT: " + std::to_string(count) + " pseudo boxes");
    const auto pc = cfg.phase_config(Phase::kBaseFt);
    const auto r = tagged(Phase::kBaseFt, [&] {
      return finetune_base(model, data.base_train, pseudo, cfg.split, pc, hooks.log);
    });
    if (write) tagged(Phase::kBaseFt, [&] { model::save_checkpoint(model, ckpt("base_ft.ckpt")); });
    auto entry =
        phase_entry(Phase::kBaseFt, &r, evaluate(Phase::kBaseFt, model), write ? "base_ft.ckpt" : "");
    entry["pseudo_boxes"] = count;
    report["phases"].push_back(entry);
  }
  {
    info("NOVEL_FT");
    model::Detector teacher = model::clone_frozen(model);
    const auto pc = cfg.phase_config(Phase::kNovelFt);
    const auto r = tagged(Phase::kNovelFt, [&] {
      return finetune_novel(model, teacher, data.novel_shots, cfg.split, pc, cfg.distill_options(),
                            hooks.log);
    });
    std::set<int64_t> base_ids;
    for (const auto& s : data.base_train) base_ids.insert(s.image_id);
    size_t base_reads = 0;
    for (const int64_t id : r.images_read) base_reads += base_ids.contains(id) ? 1 : 0;
    if (base_reads != 0) {
      throw PhaseError(phase_name(Phase::kNovelFt), "read " + std::to_string(base_reads) +
                                                        " base training images");
    }
    if (write) tagged(Phase::kNovelFt, [&] { model::save_checkpoint(model, ckpt("novel_ft.ckpt")); });
    auto entry = phase_entry(Phase::kNovelFt, &r, evaluate(Phase::kNovelFt, model),
                             write ? "novel_ft.ckpt" : "");
    entry["teacher_hash_unchanged"] = r.teacher_hash_after == r.teacher_hash_before;
    entry["base_images_read"] = base_reads;
    report["phases"].push_back(entry);
  }
  if (write) {
    std::ofstream out(cfg.output_dir / "report.json");
    if (!out) throw Error("cannot write " + (cfg.output_dir / "report.json").string());
    out << report.dump(2) << '\n';
  }
  return report;
}

std::string render_report(const json& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s | %7s %7s | %7s %7s | %7s %7s\n", "Phase", "bAP", "bAP50",
                "nAP", "nAP50", "AP", "AP50");
  os << line << std::string(64, '-') << '\n';
  for (const auto& p : report.at("phases")) {
    const auto& e = p.at("eval");
    std::snprintf(line, sizeof line, "%-10s | %7.1f %7.1f | %7.1f %7.1f | %7.1f %7.1f\n",
                  p.at("phase").get<std::string>().c_str(), e["base"]["AP"].get<double>(),
                  e["base"]["AP50"].get<double>(), e["novel"]["AP"].get<double>(),
                  e["novel"]["AP50"].get<double>(), e["all"]["AP"].get<double>(),
                  e["all"]["AP50"].get<double>());
    os << line;
  }
  return os.str();
}

}  // namespace ifsd::pipeline
