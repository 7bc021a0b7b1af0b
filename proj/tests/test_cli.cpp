#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "catch_amalgamated.hpp"

#ifndef CAGRAD_CLI_PATH
#define CAGRAD_CLI_PATH ""
#endif

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CAGRAD_CLI_PATH) + " " + args + " 2>&1";
  CliResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::filesystem::path temp_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("cli usage errors exit with code 2", "[cli]") {
  REQUIRE(run_cli("").exit_code == 2);
  REQUIRE(run_cli("toy --method cagrad").exit_code == 2);   // missing --c
  REQUIRE(run_cli("toy --method gd --c 0.5").exit_code == 2);
  REQUIRE(run_cli("toy --method warp").exit_code == 2);
  REQUIRE(run_cli("verify --trials 0").exit_code == 2);
  REQUIRE(run_cli("run /nonexistent/config.json").exit_code == 2);
  REQUIRE(run_cli("--help").exit_code == 0);
}

TEST_CASE("cli rejects malformed configs with a diagnostic", "[cli]") {
  const auto dir = temp_dir("cagrad_cli_badcfg");
  const auto cfg = dir / "bad.json";
  {
    std::ofstream out(cfg);
    out << R"({"problem": "toy", "method": "gd", "steps": 5, "inits": [[0,0]]})";
  }
  const CliResult res = run_cli("run " + cfg.string());
  REQUIRE(res.exit_code == 2);
  REQUIRE(res.output.find("stepper") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli run executes an expression config and writes trajectories", "[cli]") {
  const auto dir = temp_dir("cagrad_cli_run");
  const auto cfg = dir / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({
      "problem": {"expressions": ["x1*x1", "(x1-1)^2"], "dim": 1},
      "method": {"name": "cagrad", "c": 0.3},
      "stepper": {"type": "fixed", "alpha": 0.2},
      "steps": 100,
      "inits": [[0.8], [-0.4]],
      "seed": 2,
      "log_every": 10,
      "output_path": ")" << (dir / "out").string() << R"("
    })";
  }
  const CliResult res = run_cli("run " + cfg.string());
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  REQUIRE(std::filesystem::exists(dir / "out" / "run_0.csv"));
  REQUIRE(std::filesystem::exists(dir / "out" / "run_1.csv"));
  REQUIRE(std::filesystem::exists(dir / "out" / "summary.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli sweep emits one summary row per (c, init)", "[cli]") {
  const auto dir = temp_dir("cagrad_cli_sweep");
  const auto cfg = dir / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({
      "problem": "toy",
      "method": {"name": "cagrad", "c": 0.5},
      "stepper": {"type": "adam", "alpha": 0.002},
      "steps": 400,
      "inits": [[-8.5, 7.5], [-8.5, 5.0], [0.0, 0.0], [9.0, 9.0], [10.0, -8.0]],
      "seed": 0,
      "log_every": 100,
      "output_path": ")" << (dir / "out").string() << R"("
    })";
  }
  const CliResult res = run_cli("sweep " + cfg.string() + " --c-list 0,0.2,0.5,0.8,10");
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.output.find("25 summary rows") != std::string::npos);
  REQUIRE(std::filesystem::exists(dir / "out" / "sweep_summary.json"));
  REQUIRE(std::filesystem::exists(dir / "out" / "c_0.2" / "run_4.csv"));

  const CliResult bad = run_cli("sweep " + cfg.string() + " --c-list 0,zebra");
  REQUIRE(bad.exit_code == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli verify honors the corrupt-tolerance hook", "[cli]") {
  const CliResult ok = run_cli("verify --seed 1 --trials 5");
  INFO(ok.output);
  REQUIRE(ok.exit_code == 0);
  REQUIRE(ok.output.find("all properties passed") != std::string::npos);

  const CliResult bad = run_cli("verify --seed 1 --trials 5 --corrupt-tolerances");
  REQUIRE(bad.exit_code == 1);
  REQUIRE(bad.output.find("FAIL") != std::string::npos);
}
