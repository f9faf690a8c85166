#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string cli = XORPGD_CLI_PATH;
const fs::path demo = XORPGD_DEMO_DIR;

fs::path scratch(const std::string &name) {
  const auto p = fs::temp_directory_path() / "xorpgd_cli_test" / name;
  fs::remove_all(p);
  return p;
}

int run(const std::string &args) {
  const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path &p) { return json::parse(slurp(p)); }

/// CSV rows after the config comment and the header.
std::vector<std::vector<std::string>> csv_rows(const fs::path &p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# config-hash: ", 0), 0u);
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(CliSample, UniformModelRatiosEverySampler) {
  for (const std::string sampler : {"xor", "gibbs", "bp"}) {
    const auto out = scratch("sample_" + sampler);
    ASSERT_EQ(run("--seed 5 --out " + out.string() + " sample --model " + (demo / "uniform2.uai").string() +
                  " --sampler " + sampler + " -N 10000"),
              0);
    const auto rows = csv_rows(out / "frequencies.csv");
    ASSERT_EQ(rows.size(), 4u);
    for (const auto &r : rows) {
      const double ratio = std::stod(r.at(3));
      EXPECT_GE(ratio, 0.9) << sampler << ' ' << r[0];
      EXPECT_LE(ratio, 1.1) << sampler << ' ' << r[0];
    }
    EXPECT_EQ(read_json(out / "summary.json").at("samples"), 10000);
  }
}

TEST(CliSample, ZeroSamplesIsUsageError) {
  EXPECT_EQ(run("--out " + scratch("n0").string() + " sample --model " + (demo / "uniform2.uai").string() + " -N 0"), 2);
}

TEST(CliSample, MissingModelIsRuntimeError) {
  EXPECT_EQ(run("--out " + scratch("missing").string() + " sample --model /nonexistent.uai"), 3);
}

TEST(CliSample, BadSamplerOptionIsUsageError) {
  EXPECT_EQ(run("--out " + scratch("badrk").string() + " sample --model " + (demo / "uniform2.uai").string() +
                " --rho-kappa 3"),
            2);
}

TEST(CliSample, FixedSeedIsByteIdentical) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const std::string tail = " sample --model " + (demo / "inventory6.uai").string() + " -N 300";
  ASSERT_EQ(run("--seed 11 --out " + a.string() + tail), 0);
  ASSERT_EQ(run("--seed 11 --out " + b.string() + tail), 0);
  for (const char *f : {"samples.txt", "frequencies.csv", "summary.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(CliOptimize, InventoryProjectedRunIsFeasible) {
  const auto out = scratch("inv6");
  ASSERT_EQ(run("--seed 2 --out " + out.string() + " optimize --instance " + (demo / "inventory6.json").string() +
                " --method ixor-pgd --estimator xor -K 200 -N 10 --storage-pct 50"),
            0);
  const auto s = read_json(out / "summary.json");
  EXPECT_LE(s.at("feasibility_residual").get<double>(), 1e-8);
  const auto rows = csv_rows(out / "trace.csv");
  EXPECT_EQ(rows.size(), 200u);
  for (const auto &r : rows) EXPECT_LE(std::stod(r.at(2)), 1e-8);
}

TEST(CliOptimize, ToyGap) {
  const auto out = scratch("toy");
  ASSERT_EQ(run("--out " + out.string() + " optimize --instance " + (demo / "toy_box.json").string() +
                " --method xor-pgd --estimator exact -K 1000"),
            0);
  EXPECT_LE(std::abs(read_json(out / "summary.json").at("gap").get<double>()), 1e-3);
}

TEST(CliOptimize, EqualityToyWithAugmentedLagrangian) {
  const auto out = scratch("toy_eq");
  ASSERT_EQ(run("--out " + out.string() + " optimize --instance " + (demo / "toy_equality.json").string() +
                " --method al-primal-dual --estimator exact -K 2000"),
            0);
  const auto s = read_json(out / "summary.json");
  EXPECT_LE(s.at("feasibility_residual").get<double>(), 1e-2);
  EXPECT_LE(std::abs(s.at("gap").get<double>()), 1e-2);
}

TEST(CliOptimize, UsageErrors) {
  const std::string inst = " --instance " + (demo / "toy_box.json").string();
  EXPECT_EQ(run("--out " + scratch("u1").string() + " optimize" + inst + " --method sgd"), 2);
  EXPECT_EQ(run("--out " + scratch("u2").string() + " optimize" + inst + " --estimator mcmc"), 2);
  EXPECT_EQ(run("--out " + scratch("u3").string() + " optimize" + inst + " --method al-primal-dual"), 2);
  EXPECT_EQ(run("--out " + scratch("u4").string() + " optimize --instance " + (demo / "inventory6.json").string() +
                " -K 0"),
            2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(CliOptimize, EdgeListNetwork) {
  const auto out = scratch("edges");
  ASSERT_EQ(run("--out " + out.string() + " optimize --instance " + (demo / "ring.edges").string() +
                " --edges -K 30 --budget-pct 5"),
            0);
  EXPECT_LE(read_json(out / "summary.json").at("feasibility_residual").get<double>(), 1e-8);
}

TEST(CliOptimize, ConfigFile) {
  const auto out = scratch("config");
  fs::create_directories(out);
  const auto cfg = out / "run.json";
  std::ofstream(cfg) << json{{"seed", 4},
                             {"optimize",
                              {{"instance", (demo / "toy_box.json").string()},
                               {"estimator", "exact"},
                               {"iters", 500}}}}
                            .dump();
  ASSERT_EQ(run("--config " + cfg.string() + " --out " + (out / "r").string()), 0);
  const auto s = read_json(out / "r" / "summary.json");
  EXPECT_EQ(s.at("config").at("iters"), 500);
}

TEST(CliBench, SelfSavingsAndFeasibility) {
  const auto out = scratch("bench");
  ASSERT_EQ(run("--out " + out.string() + " bench --suite inventory --sizes 4 --seeds 2 -K 40"), 0);
  const auto rows = csv_rows(out / "savings.csv");
  ASSERT_FALSE(rows.empty());
  bool saw_self = false;
  for (const auto &r : rows) {
    if (r.at(1) == "ixor-pgd") {
      EXPECT_DOUBLE_EQ(std::stod(r.at(2)), 0.0);
      EXPECT_DOUBLE_EQ(std::stod(r.at(5)), 100.0);
      saw_self = true;
    }
  }
  EXPECT_TRUE(saw_self);
}

TEST(CliGen, WritesInstancePair) {
  const auto out = scratch("gen");
  ASSERT_EQ(run("--seed 9 --out " + out.string() + " gen --problem network --size strong --stem s"), 0);
  EXPECT_TRUE(fs::exists(out / "s.json"));
  EXPECT_TRUE(fs::exists(out / "s.uai"));
}
