// Command-line driver for the three-phase protocol.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ifsd/data.hpp"
#include "ifsd/errors.hpp"
#include "ifsd/eval.hpp"
#include "ifsd/model.hpp"
#include "ifsd/pipeline.hpp"
#include "ifsd/protocol.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ifsd;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> shots;
  std::optional<std::string> output;
  bool no_kd = false;
  bool no_selfsup = false;
  bool unfreeze_agnostic = false;
  bool overwrite = false;
  int log_every = 25;
  std::string checkpoint = "novel_ft.ckpt";
};

pipeline::ExperimentConfig load_config(const Options& o) {
  auto cfg = pipeline::load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.shots) cfg.shots = *o.shots;
  if (o.output) cfg.output_dir = *o.output;
  cfg.no_kd = cfg.no_kd || o.no_kd;
  cfg.no_selfsup = cfg.no_selfsup || o.no_selfsup;
  cfg.unfreeze_agnostic = cfg.unfreeze_agnostic || o.unfreeze_agnostic;
  cfg.validate();
  return cfg;
}

void guard_output(const fs::path& path, const Options& o) {
  if (fs::exists(path) && !o.overwrite) {
    throw Error(path.string() + " already exists (pass --overwrite to replace it)");
  }
}

fs::path data_dir(const pipeline::ExperimentConfig& cfg) { return cfg.output_dir / "data"; }

data::Dataset load_split(const pipeline::ExperimentConfig& cfg, const char* name) {
  const fs::path p = data_dir(cfg) / name / "annotations.json";
  if (!fs::exists(p)) throw DataError(p.string() + " not found (run gen-data first)");
  return data::load_coco_json(p, cfg.split);
}

model::Detector load_model(const pipeline::ExperimentConfig& cfg, const char* name) {
  const fs::path p = cfg.output_dir / name;
  if (!fs::exists(p)) throw CheckpointError(p.string() + " not found");
  auto m = pipeline::make_model(cfg);
  model::load_checkpoint(m, p);
  return m;
}

pipeline::LogFn step_logger(int every) {
  return [every](const pipeline::StepRecord& r) {
    if (every > 0 && r.step % every == 0) std::cout << pipeline::format_record(r) << std::endl;
  };
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void evaluate_and_store(const pipeline::ExperimentConfig& cfg, model::Detector& m,
                        const std::string& phase, const std::string& checkpoint) {
  const auto test = load_split(cfg, "test");
  const auto result = eval::evaluate(m, test, cfg.split, cfg.eval_batch);
  json e{{"phase", phase}, {"checkpoint", checkpoint}, {"eval", eval::to_json(result)}};
  write_json(cfg.output_dir / ("eval_" + fs::path(checkpoint).stem().string() + ".json"), e);
  std::cout << pipeline::render_report(json{{"phases", json::array({e})}});
}

int gen_data(const Options& o) {
  const auto cfg = load_config(o);
  guard_output(data_dir(cfg), o);
  fs::remove_all(data_dir(cfg));
  const auto d = pipeline::prepare_data(cfg);
  data::save_coco_json(d.base_train, data_dir(cfg) / "base_train");
  data::save_coco_json(d.novel_pool, data_dir(cfg) / "novel_pool");
  data::save_coco_json(d.test, data_dir(cfg) / "test");
  write_json(data_dir(cfg) / "manifest.json",
             {{"seed", cfg.seed},
              {"generator_version", data::kGeneratorVersion},
              {"base_train", d.base_train.size()},
              {"novel_pool", d.novel_pool.size()},
              {"test", d.test.size()}});
  std::cout << "wrote " << d.base_train.size() << " base, " << d.novel_pool.size() << " novel-pool and "
            << d.test.size() << " test images to " << data_dir(cfg) << '\n';
  return 0;
}

int gen_proposals(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path out = data_dir(cfg) / "base_train" / "proposals.json";
  guard_output(out, o);
  const auto base = load_split(cfg, "base_train");
  const auto pseudo = pipeline::generate_pseudo_gt(base, cfg);
  pipeline::save_pseudo_json(pseudo, base, out, cfg.pseudo_label());
  size_t n = 0;
  for (const auto& [id, set] : pseudo) n += set.size();
  std::cout << "wrote " << n << " pseudo boxes for " << pseudo.size() << " images to " << out << '\n';
  return 0;
}

int pretrain(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path out = cfg.output_dir / "pretrain.ckpt";
  guard_output(out, o);
  const auto base = load_split(cfg, "base_train");
  auto m = pipeline::make_model(cfg);
  pipeline::pretrain_base(m, base, cfg.split, cfg.phase_config(pipeline::Phase::kPretrain),
                          step_logger(o.log_every));
  model::save_checkpoint(m, out);
  evaluate_and_store(cfg, m, "PRETRAIN", out.filename().string());
  return 0;
}

int finetune_base(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path out = cfg.output_dir / "base_ft.ckpt";
  guard_output(out, o);
  const auto base = load_split(cfg, "base_train");
  const fs::path proposals = data_dir(cfg) / "base_train" / "proposals.json";
  if (!fs::exists(proposals)) throw DataError(proposals.string() + " not found (run gen-proposals first)");
  const auto pseudo = pipeline::load_pseudo_json(proposals);
  auto m = load_model(cfg, "pretrain.ckpt");
  pipeline::finetune_base(m, base, pseudo, cfg.split, cfg.phase_config(pipeline::Phase::kBaseFt),
                          step_logger(o.log_every));
  model::save_checkpoint(m, out);
  evaluate_and_store(cfg, m, "BASE_FT", out.filename().string());
  return 0;
}

int finetune_novel(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path out = cfg.output_dir / "novel_ft.ckpt";
  guard_output(out, o);
  const auto pool = load_split(cfg, "novel_pool");
  const auto shots = data::kshot_sample(pool, cfg.split.novel(), cfg.shots,
                                        pipeline::derive_seed(cfg.seed, 4));
  auto student = load_model(cfg, cfg.no_selfsup ? "pretrain.ckpt" : "base_ft.ckpt");
  auto teacher = model::clone_frozen(student);
  pipeline::finetune_novel(student, teacher, shots, cfg.split,
                           cfg.phase_config(pipeline::Phase::kNovelFt), cfg.distill_options(),
                           step_logger(o.log_every));
  model::save_checkpoint(student, out);
  evaluate_and_store(cfg, student, "NOVEL_FT", out.filename().string());
  return 0;
}

int evaluate(const Options& o) {
  const auto cfg = load_config(o);
  auto m = load_model(cfg, o.checkpoint.c_str());
  const std::string stem = fs::path(o.checkpoint).stem().string();
  const std::string phase = stem == "pretrain" ? "PRETRAIN" : stem == "base_ft" ? "BASE_FT"
                          : stem == "novel_ft" ? "NOVEL_FT" : stem;
  evaluate_and_store(cfg, m, phase, o.checkpoint);
  return 0;
}

int report(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path path = cfg.output_dir / "report.json";
  json r;
  if (fs::exists(path) && !o.overwrite) {
    std::ifstream in(path);
    r = json::parse(in);
  } else {
    r = json{{"seed", cfg.seed}, {"shots", cfg.shots}, {"phases", json::array()}};
    for (const char* stem : {"pretrain", "base_ft", "novel_ft"}) {
      const fs::path e = cfg.output_dir / (std::string("eval_") + stem + ".json");
      if (!fs::exists(e)) continue;
      std::ifstream in(e);
      r["phases"].push_back(json::parse(in));
    }
    if (r["phases"].empty()) throw Error("no evaluations found in " + cfg.output_dir.string());
    write_json(path, r);
  }
  std::cout << pipeline::render_report(r);
  return 0;
}

int run_all(const Options& o) {
  const auto cfg = load_config(o);
  guard_output(cfg.output_dir / "report.json", o);
  pipeline::Hooks hooks;
  hooks.log = step_logger(o.log_every);
  hooks.info = [](const std::string& m) { std::cout << m << std::endl; };
  const auto r = pipeline::run_protocol(cfg, hooks);
  std::cout << pipeline::render_report(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental few-shot detection on synthetic shapes"};
  app.require_subcommand(1);
  Options o;

  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
  };
  const Command commands[] = {
      {"gen-data", "Generate the synthetic base, novel-pool and test sets", gen_data},
      {"gen-proposals", "Selective-search pseudo boxes for the base set", gen_proposals},
      {"pretrain-base", "Train the whole model on base classes", pretrain},
      {"finetune-base", "Self-supervised fine-tuning of the class-specific parts", finetune_base},
      {"finetune-novel", "K-shot fine-tuning with distillation", finetune_novel},
      {"evaluate", "Evaluate a checkpoint on the test set", evaluate},
      {"report", "Print the Base/Novel/All table", report},
      {"run-all", "Run every phase and write report.json", run_all},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", o.config, "Experiment config JSON")->required();
    sub->add_option("--seed", o.seed, "Override the experiment seed");
    sub->add_option("--shots", o.shots, "Override K");
    sub->add_option("--output", o.output, "Override the output directory");
    sub->add_flag("--no-kd", o.no_kd, "Disable both distillation terms");
    sub->add_flag("--no-selfsup", o.no_selfsup, "Skip BASE_FT");
    sub->add_flag("--unfreeze-agnostic", o.unfreeze_agnostic,
                  "Train the class-agnostic groups during NOVEL_FT");
    sub->add_flag("--overwrite", o.overwrite, "Replace existing artifacts");
    sub->add_option("--log-every", o.log_every, "Print every n-th training step (0 = quiet)");
    if (std::string(c.name) == "evaluate") {
      sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file name inside the output dir");
    }
    subs.emplace_back(sub, c.fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  for (const auto& [sub, fn] : subs) {
    if (!sub->parsed()) continue;
    try {
      return fn(o);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << sub->get_name() << " failed: " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  return kExitUsage;
}
