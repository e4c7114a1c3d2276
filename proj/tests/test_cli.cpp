// End-to-end tests driving the command-line binary (path injected by the
// build as PDMC_CLI_PATH).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = PDMC_CLI_PATH;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const int status = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pdmc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream out(p);
  out << j.dump(2);
  return p;
}

nlohmann::json small_config() {
  return nlohmann::json{
      {"model", {{"type", "logistic"}, {"n", 100}, {"p", 3}, {"K", 10.0},
                 {"generation_seed", 7}}},
      {"domain", {{"type", "nonneg_simplex"}, {"K", 10.0}}},
      {"sampler", {{"sampler", "bps"}, {"refresh_rate", 1.0}}},
      {"subsample", true},
      {"stop", {{"max_time", 20.0}}},
      {"runs", 2},
      {"seed", 3},
      {"ess_samples", 500},
  };
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("run subcommand writes trajectories, diagnostics and a manifest") {
  const fs::path dir = fresh_dir("smoke");
  const fs::path cfg = write_config(dir, small_config());
  const fs::path out = dir / "out";
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string()) == 0);

  for (int r : {0, 1}) {
    CHECK(fs::exists(out / ("traj_" + std::to_string(r) + ".csv")));
    CHECK(fs::exists(out / ("traj_" + std::to_string(r) + ".json")));
  }
  CHECK(fs::exists(out / "diagnostics.csv"));

  const std::string diag = slurp(out / "diagnostics.csv");
  CHECK(diag.rfind("run_id,sampler,function", 0) == 0);
  CHECK(count_lines(diag) == 5);  // header + 2 functionals x 2 runs

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("base_seed") == 3);
  CHECK(manifest.at("runs") == 2);
  CHECK(manifest.at("run_seeds") == nlohmann::json({3, 4}));
  CHECK(manifest.at("config").at("sampler").at("sampler") == "bps");
  CHECK(manifest.contains("epoch_definition"));

  const auto traj_meta = nlohmann::json::parse(slurp(out / "traj_1.json"));
  CHECK(traj_meta.at("seed") == 4);
}

TEST_CASE("same seed gives byte-identical output across thread counts") {
  const fs::path dir = fresh_dir("determinism");
  const fs::path cfg = write_config(dir, small_config());

  setenv("PDMC_THREADS", "1", 1);
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " +
                  (dir / "a").string()) == 0);
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " +
                  (dir / "b").string()) == 0);
  setenv("PDMC_THREADS", "4", 1);
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " +
                  (dir / "c").string()) == 0);
  unsetenv("PDMC_THREADS");

  for (const std::string name :
       {std::string("traj_0.csv"), std::string("traj_1.csv"),
        std::string("diagnostics.csv"), std::string("manifest.json")}) {
    const std::string a = slurp(dir / "a" / name);
    CHECK(a == slurp(dir / "b" / name));
    CHECK(a == slurp(dir / "c" / name));
  }
}

TEST_CASE("seed and runs overrides take effect") {
  const fs::path dir = fresh_dir("overrides");
  const fs::path cfg = write_config(dir, small_config());
  const fs::path out = dir / "out";
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string() +
                  " --seed 42 --runs 1") == 0);
  CHECK(fs::exists(out / "traj_0.csv"));
  CHECK_FALSE(fs::exists(out / "traj_1.csv"));
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("base_seed") == 42);
  CHECK(manifest.at("run_seeds") == nlohmann::json({42}));
}

TEST_CASE("validate subcommand exit codes") {
  const fs::path dir = fresh_dir("validate");
  const fs::path cfg = write_config(dir, small_config());
  CHECK(run_cli("validate --config " + cfg.string()) == 0);

  // A wrong Lipschitz constant must break envelope dominance -> exit 1.
  nlohmann::json broken = small_config();
  broken["L"] = 1e-4;
  const fs::path bad = dir / "broken.json";
  std::ofstream(bad) << broken.dump(2);
  CHECK(run_cli("validate --config " + bad.string()) == 1);

  CHECK(run_cli("validate --config " + (dir / "missing.json").string()) == 2);
}

TEST_CASE("malformed config reports a configuration error") {
  const fs::path dir = fresh_dir("badcfg");
  nlohmann::json j = small_config();
  j["model"]["type"] = "cauchy";
  const fs::path cfg = write_config(dir, j);
  CHECK(run_cli("run --config " + cfg.string() + " --out " +
                (dir / "out").string()) == 2);
}
