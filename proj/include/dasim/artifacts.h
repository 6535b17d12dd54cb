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

#ifndef DASIM_ARTIFACTS_H_
#define DASIM_ARTIFACTS_H_

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "dasim/config.h"
#include "dasim/csv.h"
#include "dasim/histogram.h"
#include "dasim/noise.h"
#include "dasim/pipeline.h"

namespace dasim {

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view bytes);
// Throws Error(kIoError).
std::string Sha256File(const std::filesystem::path& path);

// "cell:count;cell:count" and back. Parsing throws Error(kSchemaError).
std::string FormatComposition(
    const std::vector<std::pair<int32_t, int32_t>>& composition);
std::vector<std::pair<int32_t, int32_t>> ParseComposition(
    std::string_view text);

// blocks.csv: geocode,vtd,place. households.csv:
// block_geocode,size,adults,cell_composition.
void WriteBlocksCsv(const std::filesystem::path& path, const Spine& spine);
void WriteHouseholdsCsv(const std::filesystem::path& path, const Spine& spine,
                        const HouseholdFile& households);
// Builds the CEF from a block list and a household file. Throws
// Error(kSchemaError) for unknown blocks or inconsistent households.
CefDataset LoadWorldFiles(const std::filesystem::path& blocks,
                          const std::filesystem::path& households,
                          const CellSchema& schema);

// cef.csv: geocode,cell_index,count for every block and non-zero cell.
void WriteCefCsv(const std::filesystem::path& path, const CefDataset& cef);
// nmf.csv: geocode,query_id,value,variance with one row per spine unit and
// query. Units are named by their spine key.
void WriteNmfCsv(const std::filesystem::path& path, const Spine& spine,
                 const QueryMatrix& queries, const NoisyMeasurements& nms);

// geoid,statistic,value[,variance].
void WriteLevelTable(const std::filesystem::path& path,
                     const LevelTable& table);
LevelTable ReadLevelTable(const std::filesystem::path& path, GeoLevel level);

// One output row per input line: geocode,geoid,block_group,tract,county,
// state,nmf_county,nmf_tract,nmf_opt_block_group. Malformed lines go to the
// rejects table (line,input,reason) instead.
struct CrosswalkResult {
  CsvTable rows;
  CsvTable rejects;
};
CrosswalkResult Crosswalk(std::istream& in);

// Writes the full artifact directory for the config and returns the
// manifest path. Deterministic in the config.
std::filesystem::path Simulate(const RunConfig& config,
                               const std::filesystem::path& out_dir);

// manifest.json: config hash plus the SHA-256 of every other file, sorted
// by relative path.
void WriteManifest(const std::filesystem::path& dir,
                   const std::string& config_json);

std::string ReplicateDirName(int replicate);  // rep_001, ...

}  // namespace dasim

#endif  // DASIM_ARTIFACTS_H_
