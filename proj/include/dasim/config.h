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

#ifndef DASIM_CONFIG_H_
#define DASIM_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dasim/geo.h"
#include "dasim/noise.h"
#include "dasim/swapping.h"
#include "dasim/synthetic.h"
#include "dasim/topdown.h"

namespace dasim {

inline constexpr int kConfigSchemaVersion = 1;

struct QueryOptions {
  bool detail = true;
  bool total = true;
  bool marginals = true;
};

struct RunConfig {
  uint64_t seed = 1;
  int replicates = 1;
  int topdown_runs = 2;  // 1 or 2
  std::filesystem::path output_dir;

  SpineSpec spine;
  SyntheticProfile population;
  // When both are set the world is read from these files instead of being
  // generated; relative paths resolve against the config file.
  std::filesystem::path blocks_file;
  std::filesystem::path households_file;

  std::string cells = "desk";  // "desk" or "full"
  BudgetSchedule budget = BudgetSchedule::Default();
  QueryOptions queries;
  PostProcessConfig postprocess;
  bool swap_enabled = true;
  SwapConfig swap;
  std::vector<GeoLevel> report_levels = {
      GeoLevel::kNation, GeoLevel::kState,      GeoLevel::kCounty,
      GeoLevel::kTract,  GeoLevel::kBlockGroup, GeoLevel::kBlock,
      GeoLevel::kVtd,    GeoLevel::kPlace};

  CellSchema Schema() const;
};

// Parses and validates a config document. Unknown keys, a missing or wrong
// schema_version and out-of-range values raise Error(kConfigError).
RunConfig ParseRunConfig(std::string_view text,
                         const std::filesystem::path& base_dir = {});
// Throws Error(kIoError) when the file cannot be read.
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Canonical JSON with every field spelled out; parsing it gives back an
// equal config.
std::string ToJson(const RunConfig& config);

}  // namespace dasim

#endif  // DASIM_CONFIG_H_
