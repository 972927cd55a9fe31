// Spawns the real CLI binary to pin the command surface: exit codes,
// $GEOXPLAIN_CACHE, and the synth/extract/evaluate/report flow.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string command = env + " " + std::string(GX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct CliTree {
  fs::path root;
  CliTree() {
    root = fs::temp_directory_path() / "gx_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~CliTree() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("cli exit codes and command flow") {
  CliTree tree;

  SUBCASE("config errors exit 1") {
    CHECK(run_cli("extract --config /nonexistent/config.json") == 1);
  }

  const fs::path dataset = tree.root / "data";
  CHECK(run_cli("synth --out " + dataset.string() +
                " --side 24 --train-per-class 1 --eval-per-class 2 --seed 5") == 0);
  REQUIRE(fs::exists(dataset / "manifest.jsonl"));
  REQUIRE(fs::exists(dataset / "truth.jsonl"));

  const fs::path config_path = tree.root / "run.json";
  {
    json config;
    config["run"] = {{"seed", 7}, {"output_dir", (tree.root / "unused").string()}};
    config["ingest"] = {{"manifest", (dataset / "manifest.jsonl").string()}, {"side", 24}};
    config["classifier"] = {{"backend", "stub"}, {"stub_logits", {0.0, 1.0, 0.0}}};
    config["attribution"] = {{"method", "stub"}};
    config["selection"] = {{"s_min", 0.05}};
    config["faithfulness"] = {{"random_repeats", 1}};
    config["report"] = {{"export_crop_images", false}};
    std::ofstream(config_path) << config.dump();
  }

  const std::string cache_env = "GEOXPLAIN_CACHE=" + (tree.root / "cache").string();

  SUBCASE("evaluate before extract exits 2") {
    CHECK(run_cli("evaluate --config " + config_path.string(), cache_env) == 2);
  }

  SUBCASE("extract then evaluate then report, under $GEOXPLAIN_CACHE") {
    CHECK(run_cli("extract --config " + config_path.string(), cache_env) == 0);
    // The env var overrides run.output_dir entirely.
    CHECK(fs::exists(tree.root / "cache"));
    CHECK_FALSE(fs::exists(tree.root / "unused"));

    fs::path run_dir;
    for (const auto& entry : fs::directory_iterator(tree.root / "cache")) {
      if (entry.is_directory()) run_dir = entry.path();
    }
    REQUIRE(!run_dir.empty());
    CHECK(fs::exists(run_dir / "pairs" / "stub__fallback" / "crops.jsonl"));

    CHECK(run_cli("evaluate --config " + config_path.string(), cache_env) == 0);
    CHECK(fs::exists(run_dir / "pairs" / "stub__fallback" / "summary.json"));

    CHECK(run_cli("report --run-dir " + run_dir.string()) == 0);
    CHECK(fs::exists(run_dir / "report" / "deletion.svg"));
    CHECK(fs::exists(run_dir / "report" / "gallery.md"));

    // --limit processes a prefix of the eval split.
    CHECK(run_cli("extract --config " + config_path.string() + " --limit 2 --workers 1",
                  cache_env) == 0);
  }

  SUBCASE("report without results exits 2") {
    fs::create_directories(tree.root / "empty_run");
    CHECK(run_cli("report --run-dir " + (tree.root / "empty_run").string()) == 2);
  }

  SUBCASE("unusable backend module exits 3") {
    json config;
    config["run"] = {{"seed", 7}, {"output_dir", (tree.root / "unused2").string()}};
    config["ingest"] = {{"manifest", (dataset / "manifest.jsonl").string()}, {"side", 24}};
    config["classifier"] = {{"backend", "external"}, {"module", "/nonexistent/libbackend.so"}};
    config["attribution"] = {{"method", "stub"}};
    const fs::path bad_path = tree.root / "bad.json";
    std::ofstream(bad_path) << config.dump();
    CHECK(run_cli("extract --config " + bad_path.string(), cache_env) == 3);
  }
}
