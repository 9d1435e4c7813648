#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const auto log = fs::temp_directory_path() / "ifsd_cli_test.log";
  const std::string cmd = std::string(IFSD_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

fs::path tiny_config(const std::string& name, const fs::path& out) {
  const auto dir = fs::temp_directory_path() / "ifsd_cli_cfg";
  fs::create_directories(dir);
  const auto path = dir / (name + ".json");
  std::ofstream(path) << R"({"seed": 3, "shots": 1,
    "data": {"base_train_images": 16, "novel_pool_images": 30, "test_images": 8},
    "pretrain": {"epochs": 1}, "base_ft": {"epochs": 1}, "novel_ft": {"epochs": 1},
    "output_dir": ")" << out.string() << R"("})";
  return path;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 1") {
    CHECK(run("").code == 1);
    CHECK(run("no-such-command --config x.json").code == 1);
    CHECK(run("run-all").code == 1);
    CHECK(run("--help").code == 0);
  }

  TEST_CASE("missing config exits 2 and names the path") {
    const auto r = run("run-all --config /nonexistent/dir/cfg.json");
    CHECK(r.code == 2);
    CHECK(r.output.find("/nonexistent/dir/cfg.json") != std::string::npos);
  }

  TEST_CASE("invalid config exits 2") {
    const auto path = fs::temp_directory_path() / "ifsd_cli_bad.json";
    std::ofstream(path) << R"({"shots": -1})";
    CHECK(run("gen-data --config " + path.string()).code == 2);
    std::ofstream(path) << "{ not json";
    CHECK(run("gen-data --config " + path.string()).code == 2);
  }

  TEST_CASE("run-all is deterministic and refuses to overwrite") {
    const auto out = fs::temp_directory_path() / "ifsd_cli_run";
    fs::remove_all(out);
    const auto cfg = tiny_config("det", out);
    const auto a = run("run-all --log-every 0 --config " + cfg.string());
    REQUIRE(a.code == 0);
    for (const char* f : {"pretrain.ckpt", "base_ft.ckpt", "novel_ft.ckpt", "report.json"}) {
      CHECK(fs::exists(out / f));
    }
    std::ifstream first_in(out / "report.json");
    const std::string first((std::istreambuf_iterator<char>(first_in)), std::istreambuf_iterator<char>());

    CHECK(run("run-all --log-every 0 --config " + cfg.string()).code == 3);
    REQUIRE(run("run-all --log-every 0 --overwrite --config " + cfg.string()).code == 0);
    std::ifstream second_in(out / "report.json");
    const std::string second((std::istreambuf_iterator<char>(second_in)), std::istreambuf_iterator<char>());
    CHECK(first == second);

    const auto rep = run("report --config " + cfg.string());
    CHECK(rep.code == 0);
    CHECK(rep.output.find("NOVEL_FT") != std::string::npos);
  }

  TEST_CASE("phase subcommands chain through the output directory") {
    const auto out = fs::temp_directory_path() / "ifsd_cli_steps";
    fs::remove_all(out);
    const auto cfg = tiny_config("steps", out);
    const std::string c = " --log-every 0 --config " + cfg.string();
    // Fine-tuning before its input checkpoint exists is a runtime failure.
    const auto early = run("finetune-novel" + c);
    CHECK(early.code == 3);
    CHECK(early.output.find("finetune-novel") != std::string::npos);
    REQUIRE(run("gen-data" + c).code == 0);
    REQUIRE(run("gen-proposals" + c).code == 0);
    REQUIRE(run("pretrain-base" + c).code == 0);
    REQUIRE(run("finetune-base" + c).code == 0);
    REQUIRE(run("finetune-novel" + c).code == 0);
    const auto ev = run("evaluate --checkpoint base_ft.ckpt" + c);
    CHECK(ev.code == 0);
    CHECK(fs::exists(out / "eval_base_ft.json"));
  }
}
