// Copyright 2026 The dasim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include <gtest/gtest.h>

#include "dasim/artifacts.h"
#include "dasim/config.h"
#include "dasim/csv.h"
#include "dasim/error.h"
#include "dasim/report.h"

namespace dasim {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("dasim_test_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void Spit(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

int RunCli(const std::string& args) {
  const std::string cmd = std::string(DASIM_BIN) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ErrorCode ConfigErrorOf(const std::string& text) {
  try {
    ParseRunConfig(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorCode::kUsageError;
}

// Small world that keeps end-to-end tests quick.
RunConfig SmallConfig() {
  RunConfig c;
  c.seed = 42;
  c.spine.counties_per_state = 1;
  c.spine.tracts_per_county = 2;
  c.spine.block_groups_per_tract = 2;
  c.spine.blocks_per_block_group = 3;
  return c;
}

TEST(ConfigTest, StrictParsing) {
  EXPECT_EQ(ConfigErrorOf("{}"), ErrorCode::kConfigError);
  EXPECT_EQ(ConfigErrorOf(R"({"schema_version": 2})"), ErrorCode::kConfigError);
  EXPECT_EQ(ConfigErrorOf(R"({"schema_version": 1, "sead": 3})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(ConfigErrorOf(R"({"schema_version": 1, "replicates": 0})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(ConfigErrorOf(R"({"schema_version": 1, "swap": {"base_rate": 2}})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(ConfigErrorOf(R"({"schema_version": 1, "world":
      {"blocks_file": "nope.csv", "households_file": "nope2.csv"}})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(ConfigErrorOf("not json"), ErrorCode::kConfigError);
  const RunConfig c = ParseRunConfig(
      R"({"schema_version": 1, "seed": 9, "replicates": 2, "budget": "zero",
          "swap": {"enabled": false}})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.replicates, 2);
  EXPECT_FALSE(c.swap_enabled);
  EXPECT_EQ(c.budget.Variance(GeoLevel::kBlock, QueryGroup::kTotal), 0.0);
}

TEST(ConfigTest, CanonicalRoundTrip) {
  RunConfig c = SmallConfig();
  c.budget.Set(GeoLevel::kTract, QueryGroup::kMarginal, 7.5);
  c.postprocess.invariants.push_back({GeoLevel::kCounty, "voting_age"});
  const std::string text = ToJson(c);
  EXPECT_EQ(ToJson(ParseRunConfig(text)), text);
}

TEST(ConfigTest, LoadMissingFile) {
  try {
    LoadRunConfig("/nonexistent/config.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST(CrosswalkTest, ExampleAndRejects) {
  std::istringstream in(
      "0531000100011065300195010011010\n"
      "053100010001106530019501001101\n"
      "0531000100011065300195010021010\n");
  const CrosswalkResult r = Crosswalk(in);
  ASSERT_EQ(r.rows.rows.size(), 1u);
  EXPECT_EQ(r.rows.rows[0][r.rows.Column("geoid")], "530019501001010");
  ASSERT_EQ(r.rejects.rows.size(), 2u);
  EXPECT_EQ(r.rejects.rows[0][2], "MalformedGeocode");
  EXPECT_EQ(r.rejects.rows[1][2], "InconsistentGeocode");
}

TEST(SimulateTest, DeterministicWithManifest) {
  TempDir a("sim_a"), b("sim_b");
  RunConfig c = SmallConfig();
  c.replicates = 3;
  Simulate(c, a.path());
  Simulate(c, b.path());
  for (int r = 1; r <= 3; ++r) {
    EXPECT_TRUE(fs::is_directory(a.path() / ReplicateDirName(r)));
  }
  EXPECT_FALSE(fs::exists(a.path() / ReplicateDirName(4)));
  const auto ma = nlohmann::json::parse(Slurp(a.path() / "manifest.json"));
  const auto mb = nlohmann::json::parse(Slurp(b.path() / "manifest.json"));
  EXPECT_EQ(ma, mb);
  EXPECT_EQ(ma.at("config_sha256").get<std::string>().size(), 64u);
  for (const auto& [file, sum] : ma.at("files").items()) {
    EXPECT_EQ(Sha256File(a.path() / file), sum.get<std::string>()) << file;
  }
  c.seed = 43;
  TempDir d("sim_d");
  Simulate(c, d.path());
  const auto md = nlohmann::json::parse(Slurp(d.path() / "manifest.json"));
  EXPECT_NE(md.at("files").at("cef.csv"), ma.at("files").at("cef.csv"));
}

TEST(Sha256Test, KnownDigest) {
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(SimulateTest, ZeroNoiseMatchesTruth) {
  TempDir dir("zero");
  RunConfig c = SmallConfig();
  c.budget = BudgetSchedule::Zero();
  c.swap.base_rate = 0;
  c.swap.risk_weight = 0;
  Simulate(c, dir.path());
  for (const char* level : {"block", "tract", "county"}) {
    const std::string name = std::string(level) + ".csv";
    EXPECT_EQ(Slurp(dir.path() / "truth" / name),
              Slurp(dir.path() / "rep_001" / ("td1_" + name)))
        << level;
  }
  const ReportFiles report = BuildReport(dir.path(), ReportOptions{});
  ASSERT_FALSE(report.report.rows.empty());
  for (const ReportRow& row : report.report.rows) {
    for (const auto& v : {row.estimate, row.rmse, row.raw_mse}) {
      if (v) EXPECT_EQ(*v, 0.0) << row.level << " " << row.method;
    }
  }
}

TEST(ReportTest, SingleRunRejectsIndependentMethods) {
  TempDir dir("one_run");
  RunConfig c = SmallConfig();
  c.topdown_runs = 1;
  Simulate(c, dir.path());
  ReportOptions opt;
  opt.methods = {"mse_topdown"};
  try {
    BuildReport(dir.path(), opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUsageError);
  }
  opt.methods = {"bias_topdown_single", "mse_nmf_exact"};
  EXPECT_NO_THROW(BuildReport(dir.path(), opt));
}

// The exact NMF RMSE in the report equals the root mean of the combined
// variances computed straight from nmf.csv. Each block is read off the
// coarsest NMF unit whose geocode prefix covers that block alone.
TEST(ReportTest, NmfRmseFromNmfCsv) {
  TempDir dir("nmf");
  RunConfig c;
  c.seed = 7;
  Simulate(c, dir.path());
  // unit key -> query family -> summed variance
  std::map<std::string, std::map<std::string, double>> paths;
  {
    std::ifstream in(dir.path() / "rep_001" / "nmf.csv");
    std::string line;
    std::getline(in, line);
    ASSERT_EQ(line, "geocode,query_id,value,variance");
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string geocode, query, value, variance;
      std::getline(ss, geocode, ',');
      std::getline(ss, query, ',');
      std::getline(ss, value, ',');
      std::getline(ss, variance, ',');
      const std::string family = query.substr(0, query.find('/'));
      paths[geocode][family] += std::stod(variance);
    }
  }
  std::vector<std::string> blocks;
  for (const auto& [key, f] : paths) {
    if (key.size() == 31) blocks.push_back(key);
  }
  ASSERT_FALSE(blocks.empty());
  double sum = 0;
  for (const std::string& block : blocks) {
    std::string best = block;
    for (const auto& [key, f] : paths) {
      if (key == "US" || key.size() <= 3 || !block.starts_with(key)) continue;
      const auto covered = std::count_if(
          blocks.begin(), blocks.end(),
          [&](const std::string& b) { return b.starts_with(key); });
      if (covered == 1 && key.size() < best.size()) best = key;
    }
    double precision = 0;
    for (const auto& [family, v] : paths.at(best)) precision += 1.0 / v;
    sum += 1.0 / precision;
  }
  const double expected = std::sqrt(sum / blocks.size());
  const size_t n_blocks = blocks.size();

  ReportOptions opt;
  opt.levels = {GeoLevel::kBlock};
  opt.statistics = {"total"};
  opt.methods = {"mse_nmf_exact"};
  const ReportFiles files = BuildReport(dir.path(), opt);
  bool found = false;
  for (const ReportRow& row : files.report.rows) {
    if (row.bin) continue;
    found = true;
    EXPECT_NEAR(*row.rmse, expected, 1e-9 * expected);
    EXPECT_EQ(row.n, static_cast<int64_t>(n_blocks));
  }
  EXPECT_TRUE(found);
}

TEST(ReportTest, WritesFiles) {
  TempDir dir("files");
  RunConfig c = SmallConfig();
  c.replicates = 2;
  Simulate(c, dir.path());
  WriteReport(dir.path(), BuildReport(dir.path(), ReportOptions{}));
  for (const char* f : {"report.csv", "report.json", "abs_error.csv",
                        "run_correlation.csv", "share_bins.csv"}) {
    EXPECT_TRUE(fs::is_regular_file(dir.path() / f)) << f;
  }
  const auto j = nlohmann::json::parse(Slurp(dir.path() / "report.json"));
  EXPECT_FALSE(j.at("rows").empty());
}

TEST(CliTest, Crosswalk) {
  TempDir dir("cli_cw");
  const fs::path good = dir.path() / "good.txt";
  Spit(good, "0531000100011065300195010011010\n");
  const fs::path out = dir.path() / "out.csv";
  EXPECT_EQ(RunCli("crosswalk " + good.string() + " --out " + out.string()), 0);
  EXPECT_NE(Slurp(out).find("530019501001010"), std::string::npos);

  const fs::path empty = dir.path() / "empty.txt";
  Spit(empty, "");
  EXPECT_EQ(RunCli("crosswalk " + empty.string() + " --out " + out.string()), 0);
  const std::string text = Slurp(out);
  EXPECT_EQ(text.substr(0, 20), "geocode,geoid,level,");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);

  const fs::path bad = dir.path() / "bad.txt";
  Spit(bad, "053100010001106530019501001101\n");
  const fs::path rejects = dir.path() / "rejects.csv";
  EXPECT_EQ(RunCli("crosswalk " + bad.string() + " --out " + out.string() +
                " --rejects " + rejects.string()),
            1);
  EXPECT_NE(Slurp(rejects).find("MalformedGeocode"), std::string::npos);

  EXPECT_EQ(RunCli("crosswalk " + (dir.path() / "missing.txt").string() +
                " --out " + out.string()),
            2);
}

TEST(CliTest, SimulateAndReport) {
  TempDir dir("cli_sim");
  const fs::path config = dir.path() / "config.json";
  Spit(config, R"({"schema_version": 1, "seed": 3,
    "world": {"spine": {"counties_per_state": 1, "tracts_per_county": 2}}})");
  const fs::path out = dir.path() / "run";
  EXPECT_EQ(RunCli("simulate --config " + config.string() + " --replicates 2 --out " +
                out.string()),
            0);
  EXPECT_TRUE(fs::is_directory(out / "rep_002"));
  EXPECT_EQ(RunCli("report " + out.string() + " --level block --statistic total"), 0);
  EXPECT_TRUE(fs::is_regular_file(out / "report.csv"));
  EXPECT_EQ(RunCli("report " + out.string() + " --method no_such_method"), 1);
  EXPECT_EQ(RunCli("report " + out.string() + " --level galaxy"), 1);
  EXPECT_EQ(RunCli("report " + (dir.path() / "nothing").string()), 2);

  Spit(config, R"({"schema_version": 1, "bogus": 1})");
  EXPECT_EQ(RunCli("simulate --config " + config.string() + " --out " + out.string()),
            1);
  EXPECT_EQ(RunCli("frobnicate"), 1);
}

TEST(CliTest, VerifySingleCriterion) {
  EXPECT_EQ(RunCli("verify --criterion 7"), 0);
  EXPECT_EQ(RunCli("verify --criterion 12"), 1);
}

}  // namespace
}  // namespace dasim
