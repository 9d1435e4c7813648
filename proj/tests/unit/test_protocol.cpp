#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ifsd/errors.hpp"
#include "ifsd/protocol.hpp"

using namespace ifsd;
using namespace ifsd::pipeline;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.seed = 4;
  c.shots = 2;
  c.data.base_train_images = 12;
  c.data.novel_pool_images = 30;
  c.data.test_images = 6;
  c.pretrain.epochs = 1;
  c.base_ft.epochs = 1;
  c.novel_ft.epochs = 1;
  c.output_dir.clear();
  return c;
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("ablation flags touch only their settings") {
    auto c = tiny();
    const auto full = c.phase_config(Phase::kNovelFt);
    CHECK(full.lambda_feat == 0.1);
    CHECK(full.lambda_cls == 2.0);
    CHECK((full.trainable == model::kClassSpecific));
    c.no_kd = true;
    auto nk = c.phase_config(Phase::kNovelFt);
    CHECK(nk.lambda_feat == 0.0);
    CHECK(nk.lambda_cls == 0.0);
    nk.lambda_feat = full.lambda_feat;
    nk.lambda_cls = full.lambda_cls;
    CHECK(nlohmann::json(nk) == nlohmann::json(full));
    CHECK(nlohmann::json(c.phase_config(Phase::kBaseFt)) ==
          nlohmann::json(tiny().phase_config(Phase::kBaseFt)));
    c.no_kd = false;
    c.unfreeze_agnostic = true;
    CHECK((c.phase_config(Phase::kNovelFt).trainable == model::kAllGroups));
    CHECK((c.phase_config(Phase::kBaseFt).trainable == model::kClassSpecific));
    CHECK(c.pseudo_label() == 5);
  }

  TEST_CASE("derived seeds are distinct per stream") {
    CHECK(derive_seed(1, 1) != derive_seed(1, 2));
    CHECK(derive_seed(1, 1) != derive_seed(2, 1));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  }

  TEST_CASE("config file round trip and errors") {
    const auto dir = fs::temp_directory_path() / "ifsd_test_protocol";
    fs::create_directories(dir);
    auto c = tiny();
    c.prune.top_o = 7;
    c.data.novel_pool_classes = "novel";
    c.novel_ft.lr = 1e-3;
    std::ofstream(dir / "c.json") << nlohmann::json(c).dump(2);
    const auto back = load_experiment_config(dir / "c.json");
    CHECK(nlohmann::json(back) == nlohmann::json(c));

    try {
      load_experiment_config(dir / "absent.json");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("absent.json") != std::string::npos);
    }
    std::ofstream(dir / "bad.json") << R"({"shots": 2, "model": {"num_queries": 0}})";
    CHECK_THROWS_AS(load_experiment_config(dir / "bad.json"), ConfigError);
    std::ofstream(dir / "bad.json") << R"({"data": {"novel_pool_classes": "some"}})";
    CHECK_THROWS_AS(load_experiment_config(dir / "bad.json"), ConfigError);
  }

  TEST_CASE("prepared data respects the class contract") {
    const auto c = tiny();
    const auto d = prepare_data(c);
    CHECK(d.base_train.size() == 12);
    CHECK(d.test.size() == 6);
    for (const auto& s : d.base_train) {
      for (const auto& g : s.gt) CHECK(c.split.is_base(g.label));
    }
    const auto counts = data::supervised_counts(d.novel_shots, 5);
    CHECK(counts[3] == 2);
    CHECK(counts[4] == 2);
    std::set<int64_t> base_ids, other_ids;
    for (const auto& s : d.base_train) base_ids.insert(s.image_id);
    for (const auto* ds : {&d.novel_pool, &d.test}) {
      for (const auto& s : *ds) CHECK_FALSE(base_ids.contains(s.image_id));
    }
    const auto again = prepare_data(c);
    CHECK((again.novel_shots == d.novel_shots));
  }

  TEST_CASE("pseudo boxes survive the json round trip") {
    const auto c = tiny();
    const auto d = prepare_data(c);
    const auto pseudo = generate_pseudo_gt(d.base_train, c);
    CHECK(pseudo.size() == d.base_train.size());
    for (const auto& [id, set] : pseudo) {
      CHECK(set.size() <= static_cast<size_t>(c.prune.top_o));
      for (const auto& g : set) CHECK(g.label == 5);
    }
    const auto path = fs::temp_directory_path() / "ifsd_test_protocol" / "pseudo.json";
    fs::create_directories(path.parent_path());
    save_pseudo_json(pseudo, d.base_train, path, 5);
    const auto back = load_pseudo_json(path);
    REQUIRE(back.size() == pseudo.size());
    for (const auto& [id, set] : pseudo) {
      REQUIRE(back.at(id).size() == set.size());
      for (size_t i = 0; i < set.size(); ++i) {
        CHECK(back.at(id)[i].box.cx == doctest::Approx(set[i].box.cx).epsilon(1e-9));
        CHECK(back.at(id)[i].box.w == doctest::Approx(set[i].box.w).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("run_protocol report structure") {
    auto c = tiny();
    int logged = 0;
    Hooks hooks;
    hooks.log = [&](const StepRecord&) { ++logged; };
    const auto report = run_protocol(c, hooks);
    REQUIRE(report["phases"].size() == 3);
    CHECK(report["phases"][0]["phase"] == "PRETRAIN");
    CHECK(report["phases"][1]["phase"] == "BASE_FT");
    CHECK(report["phases"][2]["phase"] == "NOVEL_FT");
    CHECK(report["phases"][2]["teacher_hash_unchanged"] == true);
    CHECK(report["phases"][2]["base_images_read"] == 0);
    CHECK(report["phases"][1]["pseudo_boxes"].get<int>() > 0);
    CHECK(logged > 0);
    for (const auto& p : report["phases"]) {
      for (const char* agg : {"base", "novel", "all"}) {
        const double ap50 = p["eval"][agg]["AP50"].get<double>();
        CHECK(ap50 >= 0.0);
        CHECK(ap50 <= 100.0);
      }
    }
    CHECK(render_report(report).find("BASE_FT") != std::string::npos);

    c.no_selfsup = true;
    const auto skipped = run_protocol(c);
    REQUIRE(skipped["phases"].size() == 2);
    CHECK(skipped["phases"][1]["phase"] == "NOVEL_FT");
    // Without BASE_FT the PRETRAIN phase is identical.
    CHECK(skipped["phases"][0] == report["phases"][0]);
  }

  TEST_CASE("phase failures are tagged with the phase") {
    auto c = tiny();
    c.shots = 500;  // the novel pool cannot supply this many instances
    try {
      run_protocol(c);
      FAIL("expected PhaseError");
    } catch (const PhaseError& e) {
      CHECK(std::string(e.what()).rfind("PRETRAIN: ", 0) == 0);
    }
  }
}
