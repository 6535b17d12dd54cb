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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dasim/acceptance.h"
#include "dasim/artifacts.h"
#include "dasim/config.h"
#include "dasim/csv.h"
#include "dasim/error.h"
#include "dasim/geo.h"
#include "dasim/report.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRejects = 1;
constexpr int kExitIo = 2;
constexpr int kExitInfeasible = 3;

int ExitCodeFor(dasim::ErrorCode code) {
  switch (code) {
    case dasim::ErrorCode::kIoError:
      return kExitIo;
    case dasim::ErrorCode::kInfeasibleConstraints:
      return kExitInfeasible;
    default:
      return kExitRejects;
  }
}

int RunCrosswalk(const fs::path& input, fs::path out, fs::path rejects) {
  std::ifstream in(input);
  if (!in) {
    throw dasim::Error(dasim::ErrorCode::kIoError,
                       "cannot read " + input.string());
  }
  const dasim::CrosswalkResult result = dasim::Crosswalk(in);
  if (rejects.empty()) {
    rejects = out;
    rejects.replace_filename(out.stem().string() + "_rejects.csv");
  }
  dasim::WriteCsv(out, result.rows);
  dasim::WriteCsv(rejects, result.rejects);
  std::cerr << result.rows.rows.size() << " geocodes mapped, "
            << result.rejects.rows.size() << " rejected\n";
  return result.rejects.rows.empty() ? kExitOk : kExitRejects;
}

int RunSimulate(const std::string& config_path, std::optional<uint64_t> seed,
                std::optional<int> replicates, const std::string& out) {
  dasim::RunConfig config = config_path.empty()
                                ? dasim::RunConfig{}
                                : dasim::LoadRunConfig(config_path);
  if (seed) config.seed = *seed;
  if (replicates) {
    if (*replicates < 1) {
      throw dasim::Error(dasim::ErrorCode::kConfigError,
                         "replicates must be at least 1");
    }
    config.replicates = *replicates;
  }
  fs::path dir = out.empty() ? config.output_dir : fs::path(out);
  if (dir.empty()) {
    throw dasim::Error(dasim::ErrorCode::kUsageError,
                       "no output directory: pass --out or set output_dir");
  }
  dasim::Simulate(config, dir);
  std::cerr << "wrote " << dir.string() << "\n";
  return kExitOk;
}

int RunReport(const fs::path& dir, const std::vector<std::string>& levels,
              const std::vector<std::string>& statistics,
              const std::vector<std::string>& methods, int bins,
              const std::string& out) {
  dasim::ReportOptions options;
  for (const std::string& name : levels) {
    const auto level = dasim::ParseLevel(name);
    if (!level) {
      throw dasim::Error(dasim::ErrorCode::kUsageError,
                         "unknown level " + name);
    }
    options.levels.push_back(*level);
  }
  options.statistics = statistics;
  options.methods = methods;
  options.bins = bins;
  const dasim::ReportFiles files = dasim::BuildReport(dir, options);
  const fs::path target = out.empty() ? dir : fs::path(out);
  fs::create_directories(target);
  dasim::WriteReport(target, files);
  std::cerr << files.report.rows.size() << " report rows written to "
            << target.string() << "\n";
  return kExitOk;
}

int RunVerify(const std::vector<int>& criteria, std::optional<uint64_t> seed) {
  dasim::AcceptanceOptions options;
  options.criteria = criteria;
  if (seed) options.seed = *seed;
  bool all = true;
  for (const auto& r : dasim::RunAcceptance(options, &std::cout)) {
    all &= r.pass;
  }
  return all ? kExitOk : kExitRejects;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Census disclosure-avoidance simulator and error estimators"};
  app.require_subcommand(1);

  auto* crosswalk = app.add_subcommand(
      "crosswalk", "Map 31-character geocodes to standard geographies");
  std::string cw_input, cw_out = "crosswalk.csv", cw_rejects;
  crosswalk->add_option("input", cw_input, "File with one geocode per line")
      ->required();
  crosswalk->add_option("--out", cw_out, "Crosswalk CSV")->capture_default_str();
  crosswalk->add_option("--rejects", cw_rejects,
                        "Rejects CSV (default: <out>_rejects.csv)");

  auto* simulate = app.add_subcommand(
      "simulate", "Generate a world and write replicate artifacts");
  std::string sim_config, sim_out;
  std::optional<uint64_t> sim_seed;
  std::optional<int> sim_replicates;
  simulate->add_option("--config", sim_config, "Run config (JSON)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--seed", sim_seed, "Override the config seed");
  simulate->add_option("--replicates", sim_replicates,
                       "Override the replicate count");
  simulate->add_option("--out", sim_out, "Artifact directory");

  auto* report = app.add_subcommand(
      "report", "Compute error reports from an artifact directory");
  std::string rep_dir, rep_out;
  std::vector<std::string> rep_levels, rep_stats, rep_methods;
  int rep_bins = 10;
  report->add_option("dir", rep_dir, "Artifact directory")->required();
  report->add_option("--level", rep_levels, "Geographic level (repeatable)");
  report->add_option("--statistic", rep_stats, "Statistic (repeatable)");
  report->add_option("--method", rep_methods, "Estimator (repeatable)");
  report->add_option("--bins", rep_bins, "Population bins")
      ->check(CLI::PositiveNumber);
  report->add_option("--out", rep_out,
                     "Output directory (default: the artifact directory)");

  auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
  std::vector<int> ver_criteria;
  std::optional<uint64_t> ver_seed;
  verify->add_option("--criterion", ver_criteria, "Criterion id (repeatable)")
      ->check(CLI::Range(1, dasim::kNumCriteria));
  verify->add_option("--seed", ver_seed, "Master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitRejects;
  }

  try {
    if (*crosswalk) return RunCrosswalk(cw_input, cw_out, cw_rejects);
    if (*simulate) {
      return RunSimulate(sim_config, sim_seed, sim_replicates, sim_out);
    }
    if (*report) {
      return RunReport(rep_dir, rep_levels, rep_stats, rep_methods, rep_bins,
                       rep_out);
    }
    if (*verify) return RunVerify(ver_criteria, ver_seed);
  } catch (const dasim::Error& e) {
    std::cerr << "error: " << dasim::ErrorCodeName(e.code()) << ": "
              << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
