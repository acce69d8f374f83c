#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "zoomrds/runner.hpp"

namespace fs = std::filesystem;
using namespace zoomrds;

namespace {

const fs::path kConfigs = ZOOMRDS_CONFIG_DIR;
const std::string kBinary = ZOOMRDS_BINARY;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("zoomrds_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const auto p = dir / "config.json";
  std::ofstream(p) << body;
  return p;
}

int run(const std::string& command, const fs::path& config, const fs::path& out, bool strict = false,
        std::size_t workers = 1, std::optional<std::uint64_t> seed = {}) {
  cli::Options opt;
  opt.command = command;
  opt.config = config.string();
  opt.out = out.string();
  opt.strict = strict;
  opt.workers = workers;
  opt.seed = seed;
  opt.timestamp = false;
  std::ostringstream err;
  return cli::run(opt, err);
}

int shell(const std::string& args) {
  const int status = std::system((kBinary + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

cli::Json results(const fs::path& out) { return cli::Json::parse(slurp(out / "results.json")); }

}  // namespace

TEST(Cli, AxiomsPass) {
  const auto out = scratch("axioms");
  EXPECT_EQ(run("axioms", kConfigs / "axioms.json", out), 0);
  const auto j = results(out);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["results"]["families"].size(), 4u);
  for (const auto& f : j["results"]["families"]) EXPECT_TRUE(f["passed"].get<bool>());
}

TEST(Cli, HarmonicFamilyIsPreconditionFailure) {
  const auto out = scratch("harmonic");
  EXPECT_EQ(run("axioms", kConfigs / "axioms_harmonic.json", out), 4);
  const auto j = results(out);
  EXPECT_EQ(j["exit_code"], 4);
  bool found = false;
  for (const auto& a : j["results"]["families"][0]["axioms"])
    if (a["name"] == "summability") {
      EXPECT_FALSE(a["passed"].get<bool>());
      EXPECT_FALSE(a["counterexample"].get<std::string>().empty());
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(Cli, ResultsEmbedHashSeedAndRule) {
  const auto out = scratch("meta");
  ASSERT_EQ(run("axioms", kConfigs / "axioms.json", out, false, 1, 99), 0);
  const auto j = results(out);
  EXPECT_EQ(j["seed"], 99u);
  EXPECT_EQ(j["seed_rule"], kSeedRule);
  EXPECT_EQ(j["config_hash"], config::config_hash(config::load((kConfigs / "axioms.json").string())));
  EXPECT_FALSE(j.contains("timestamp"));
}

TEST(Cli, ConfigHashIgnoresFormatting) {
  const auto a = cli::Json::parse(R"({"b": 1, "a": [1, 2]})");
  const auto b = cli::Json::parse("{\n  \"a\": [1,2],\n  \"b\": 1\n}");
  EXPECT_EQ(config::config_hash(a), config::config_hash(b));
  EXPECT_NE(config::config_hash(a), config::config_hash(cli::Json::parse(R"({"b": 2, "a": [1, 2]})")));
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch("config_errors");
  EXPECT_EQ(run("axioms", dir / "missing.json", dir), 2);
  EXPECT_EQ(run("pressure", write_config(dir, R"({"system": {"catalog": "doubling"}, "bogus": 1})"), dir), 2);
  EXPECT_EQ(run("pressure", write_config(dir, R"({"system": {"catalog": "nowhere"}, "pressure": {}})"), dir), 2);
  EXPECT_EQ(run("pressure", write_config(dir, R"({"system": {"catalog": "doubling"}})"), dir), 2);
  EXPECT_EQ(run("pressure", write_config(dir, R"({"system": {"catalog": "doubling"},
      "pressure": {"eps": [0.001], "n": [2, 3], "grid": 1000}})"), dir), 2);
  EXPECT_EQ(run("simulate", write_config(dir, R"({"system": {"catalog": "doubling"},
      "simulate": {"x0": "zero"}})"), dir), 2);
  EXPECT_EQ(run("simulate", write_config(dir, "{ not json"), dir), 2);
  EXPECT_FALSE(fs::exists(dir / "results.json"));
}

TEST(Cli, FixedPointRequirementExitsFour) {
  const auto dir = scratch("fixed_point");
  const auto cfg = write_config(dir, R"({
    "system": {"catalog": "split-attractor"},
    "potential_gap": {
      "fixed_point": {"x0": 0.3, "rho": 0.1, "h_top": 0.69},
      "zooming_family": [{"kind": "dirac", "x0": 0.0, "flag": "zooming-like"}],
      "non_zooming_family": [{"kind": "dirac", "x0": 0.6666666666666666, "flag": "non-zooming-like"}]
    }})");
  EXPECT_EQ(run("potential-gap", cfg, dir), 4);
  EXPECT_EQ(results(dir)["status"], "precondition-failure");
}

TEST(Cli, ExpansivityScaleAboveDeltaExitsFour) {
  const auto dir = scratch("expansivity");
  const auto cfg = write_config(dir, R"({
    "system": {"catalog": "doubling"},
    "zooming": {"delta": 0.05, "expansivity": {"pairs": 10, "epsilon": 0.1}}})");
  EXPECT_EQ(run("zooming", cfg, dir), 4);
}

TEST(Cli, StrictEscalatesWarnings) {
  const auto dir = scratch("strict");
  const auto cfg = kConfigs / "potential_gap_auto_flags.json";
  EXPECT_EQ(run("potential-gap", cfg, dir), 0);
  EXPECT_EQ(results(dir)["status"], "warnings");
  EXPECT_FALSE(results(dir)["warnings"].empty());
  EXPECT_EQ(run("potential-gap", cfg, dir, true), 3);
  EXPECT_EQ(results(dir)["exit_code"], 3);
}

TEST(Cli, StrictWithoutWarningsIsSuccess) {
  const auto dir = scratch("strict_clean");
  EXPECT_EQ(run("axioms", kConfigs / "axioms.json", dir, true), 0);
}

TEST(Cli, SimulateWritesOrbitDumps) {
  const auto dir = scratch("simulate");
  ASSERT_EQ(run("simulate", kConfigs / "simulate_random_doubling_tripling.json", dir), 0);
  std::ifstream in(dir / "orbit_1.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,symbol,x,log_deriv,birkhoff_sum");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 201);
  EXPECT_EQ(results(dir)["results"]["orbits"].size(), 2u);
}

TEST(Cli, PeriodicWordInSimulate) {
  const auto dir = scratch("simulate_word");
  const auto cfg = write_config(dir, R"({
    "system": {"catalog": "random-doubling-tripling"},
    "simulate": {"x0": [0.125], "length": 4, "word": [1, 0]}})");
  ASSERT_EQ(run("simulate", cfg, dir), 0);
  std::ifstream in(dir / "orbit_0.csv");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> symbols;
  while (std::getline(in, line)) symbols.push_back(line.substr(line.find(',') + 1, 1));
  ASSERT_EQ(symbols.size(), 5u);
  EXPECT_EQ(symbols[0], "1");
  EXPECT_EQ(symbols[1], "0");
  EXPECT_EQ(symbols[2], "1");
  EXPECT_EQ(symbols[3], "0");
}

TEST(Cli, WorkersDoNotChangeResults) {
  const auto a = scratch("workers_a"), b = scratch("workers_b");
  const auto cfg = kConfigs / "verify_vp_random_doubling_tripling.json";
  ASSERT_EQ(run("verify-vp", cfg, a, false, 1), 0);
  ASSERT_EQ(run("verify-vp", cfg, b, false, 3), 0);
  EXPECT_EQ(slurp(a / "results.json"), slurp(b / "results.json"));
}

TEST(Cli, SeedOverrideChangesStochasticResults) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  const auto cfg = kConfigs / "verify_vp_random_doubling_tripling.json";
  ASSERT_EQ(run("verify-vp", cfg, a, false, 1, 1), 0);
  ASSERT_EQ(run("verify-vp", cfg, b, false, 1, 2), 0);
  EXPECT_NE(results(a)["results"]["pressure"], results(b)["results"]["pressure"]);
}

TEST(Cli, BinaryRejectsBadArguments) {
  EXPECT_EQ(shell("frobnicate --config " + (kConfigs / "axioms.json").string()), 2);
  EXPECT_EQ(shell("axioms"), 2);
  EXPECT_EQ(shell("axioms --config " + (kConfigs / "axioms.json").string() + " --workers 0"), 2);
}

TEST(Cli, BinaryWritesTimestampOnlyDifference) {
  const auto a = scratch("bin_a"), b = scratch("bin_b");
  const auto cfg = (kConfigs / "zooming_random_doubling_tripling.json").string();
  ASSERT_EQ(shell("zooming --config " + cfg + " --out " + a.string() + " --workers 1"), 0);
  ASSERT_EQ(shell("zooming --config " + cfg + " --out " + b.string() + " --workers 2"), 0);
  auto ja = results(a), jb = results(b);
  ASSERT_TRUE(ja.contains("timestamp"));
  ja.erase("timestamp");
  jb.erase("timestamp");
  EXPECT_EQ(ja.dump(2), jb.dump(2));
  EXPECT_EQ(slurp(a / "ensemble.csv"), slurp(b / "ensemble.csv"));
}
