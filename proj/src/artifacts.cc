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

#include "dasim/artifacts.h"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dasim/error.h"
#include "json.hpp"

namespace dasim {

namespace fs = std::filesystem;

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "SHA-256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string Sha256File(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Sha256Hex(buffer.str());
}

std::string FormatComposition(
    const std::vector<std::pair<int32_t, int32_t>>& composition) {
  std::string out;
  for (const auto& [cell, count] : composition) {
    if (!out.empty()) out += ';';
    out += std::to_string(cell) + ":" + std::to_string(count);
  }
  return out;
}

std::vector<std::pair<int32_t, int32_t>> ParseComposition(
    std::string_view text) {
  std::vector<std::pair<int32_t, int32_t>> out;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find(';', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view item = text.substr(start, end - start);
    const size_t colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::kSchemaError,
                  "bad cell composition '" + std::string(text) + "'");
    }
    out.emplace_back(static_cast<int32_t>(ParseInt(item.substr(0, colon))),
                     static_cast<int32_t>(ParseInt(item.substr(colon + 1))));
    start = end + 1;
  }
  return out;
}

void WriteBlocksCsv(const fs::path& path, const Spine& spine) {
  CsvTable t{{"geocode", "vtd", "place"}, {}};
  for (const BlockRecord& b : spine.blocks()) {
    t.rows.push_back({b.geocode.raw, b.vtd, b.place});
  }
  WriteCsv(path, t);
}

void WriteHouseholdsCsv(const fs::path& path, const Spine& spine,
                        const HouseholdFile& households) {
  CsvTable t{{"block_geocode", "size", "adults", "cell_composition"}, {}};
  for (const Household& h : households.households) {
    t.rows.push_back({spine.block(h.block).geocode.raw, std::to_string(h.size),
                      std::to_string(h.adults),
                      FormatComposition(h.composition)});
  }
  WriteCsv(path, t);
}

CefDataset LoadWorldFiles(const fs::path& blocks_path,
                          const fs::path& households_path,
                          const CellSchema& schema) {
  const CsvTable bt = ReadCsv(blocks_path, {"geocode", "vtd", "place"});
  std::vector<BlockRecord> records;
  for (const auto& row : bt.rows) {
    records.push_back({ParseGeocode(row[0]), row[1], row[2]});
  }
  auto spine = std::make_shared<const Spine>(Spine::Build(std::move(records)));
  std::map<std::string, BlockIndex> index;
  for (size_t b = 0; b < spine->num_blocks(); ++b) {
    index[spine->block(static_cast<BlockIndex>(b)).geocode.raw] =
        static_cast<BlockIndex>(b);
  }
  const CsvTable ht = ReadCsv(
      households_path, {"block_geocode", "size", "adults", "cell_composition"});
  HouseholdFile file;
  for (const auto& row : ht.rows) {
    auto it = index.find(row[0]);
    if (it == index.end()) {
      throw Error(ErrorCode::kSchemaError,
                  "household in unknown block " + row[0]);
    }
    Household h;
    h.block = it->second;
    h.size = static_cast<int>(ParseInt(row[1]));
    h.adults = static_cast<int>(ParseInt(row[2]));
    h.composition = ParseComposition(row[3]);
    int64_t members = 0;
    for (const auto& [cell, count] : h.composition) members += count;
    if (h.size < 1 || h.adults < 0 || h.adults > h.size || members != h.size) {
      throw Error(ErrorCode::kSchemaError,
                  "inconsistent household in block " + row[0]);
    }
    file.households.push_back(std::move(h));
  }
  std::vector<Histogram> blocks =
      BlockHistograms(file, spine->num_blocks(), schema);
  return MakeCefDataset(spine, schema, std::move(blocks), std::move(file));
}

void WriteCefCsv(const fs::path& path, const CefDataset& cef) {
  CsvTable t{{"geocode", "cell_index", "count"}, {}};
  const Spine& spine = *cef.spine;
  for (size_t b = 0; b < spine.num_blocks(); ++b) {
    const auto bi = static_cast<BlockIndex>(b);
    const Histogram& h = cef.at(spine.block_node(bi));
    for (int c = 0; c < h.size(); ++c) {
      if (h[c] != 0) {
        t.rows.push_back({spine.block(bi).geocode.raw, std::to_string(c),
                          std::to_string(h[c])});
      }
    }
  }
  WriteCsv(path, t);
}

void WriteNmfCsv(const fs::path& path, const Spine& spine,
                 const QueryMatrix& queries, const NoisyMeasurements& nms) {
  CsvTable t{{"geocode", "query_id", "value", "variance"}, {}};
  for (size_t n = 0; n < spine.nodes().size(); ++n) {
    const NoisyMeasurementSet& m = nms.by_node.at(n);
    for (int j = 0; j < queries.num_queries(); ++j) {
      t.rows.push_back({spine.node(static_cast<NodeIndex>(n)).key,
                        queries.queries()[j].id, std::to_string(m.values[j]),
                        FormatNumber(m.variances[j])});
    }
  }
  WriteCsv(path, t);
}

void WriteLevelTable(const fs::path& path, const LevelTable& table) {
  const bool with_variance = !table.variances.empty();
  CsvTable t{{"geoid", "statistic", "value"}, {}};
  if (with_variance) t.header.push_back("variance");
  for (size_t u = 0; u < table.ids.size(); ++u) {
    for (size_t s = 0; s < table.statistics.size(); ++s) {
      std::vector<std::string> row = {table.ids[u], table.statistics[s],
                                      FormatNumber(table.values[u][s])};
      if (with_variance) row.push_back(FormatNumber(table.variances[u][s]));
      t.rows.push_back(std::move(row));
    }
  }
  WriteCsv(path, t);
}

LevelTable ReadLevelTable(const fs::path& path, GeoLevel level) {
  const CsvTable t = ReadCsv(path);
  const bool with_variance = t.header.size() == 4;
  const std::vector<std::string> expected =
      with_variance
          ? std::vector<std::string>{"geoid", "statistic", "value", "variance"}
          : std::vector<std::string>{"geoid", "statistic", "value"};
  if (t.header != expected) {
    throw Error(ErrorCode::kSchemaError,
                path.string() + " has an unexpected header");
  }
  LevelTable out;
  out.level = level;
  std::map<std::string, int> stat_index, unit_index;
  for (const auto& row : t.rows) {
    if (!stat_index.count(row[1])) {
      stat_index[row[1]] = static_cast<int>(out.statistics.size());
      out.statistics.push_back(row[1]);
    }
  }
  for (const auto& row : t.rows) {
    auto [it, fresh] =
        unit_index.emplace(row[0], static_cast<int>(out.ids.size()));
    if (fresh) {
      out.ids.push_back(row[0]);
      out.values.emplace_back(out.statistics.size(), std::nan(""));
      if (with_variance) {
        out.variances.emplace_back(out.statistics.size(), std::nan(""));
      }
    }
    const int u = it->second, s = stat_index[row[1]];
    out.values[u][s] = ParseDouble(row[2]);
    if (with_variance) out.variances[u][s] = ParseDouble(row[3]);
  }
  for (const auto& v : out.values) {
    for (double x : v) {
      if (std::isnan(x)) {
        throw Error(ErrorCode::kCoverageError,
                    path.string() + " lacks a statistic for some geography");
      }
    }
  }
  return out;
}

CrosswalkResult Crosswalk(std::istream& in) {
  CrosswalkResult r;
  r.rows.header = {"geocode",    "geoid",     "level",
                   "aian_flag",  "block_group", "tract",
                   "county",     "state",     "nmf_county",
                   "nmf_tract",  "nmf_opt_block_group"};
  r.rejects.header = {"line", "input", "reason"};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const GeoCode g = ParseGeocode(line);
      const std::string geoid = ToGeoid(g).code;
      r.rows.rows.push_back({g.raw, geoid, "block",
                             std::to_string(g.aian_flag), geoid.substr(0, 12),
                             geoid.substr(0, 11), geoid.substr(0, 5),
                             geoid.substr(0, 2), g.SpineKey(GeoLevel::kCounty),
                             g.SpineKey(GeoLevel::kTract),
                             g.SpineKey(GeoLevel::kOptBlockGroup)});
    } catch (const Error& e) {
      std::string shown = line;
      for (char& c : shown) {
        if (c == ',') c = ';';
      }
      r.rejects.rows.push_back({std::to_string(line_no), shown,
                                std::string(ErrorCodeName(e.code()))});
    }
  }
  return r;
}

std::string ReplicateDirName(int replicate) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rep_%03d", replicate);
  return buf;
}

void WriteManifest(const fs::path& dir, const std::string& config_json) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["config_sha256"] = Sha256Hex(config_json);
  nlohmann::ordered_json list = nlohmann::ordered_json::object();
  for (const std::string& f : files) list[f] = Sha256File(dir / f);
  j["files"] = list;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write manifest");
  out << j.dump(2) << '\n';
}

namespace {

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

std::string SchemaJson(const CellSchema& schema,
                       const AggregationMatrix& stats) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json axes = nlohmann::ordered_json::array();
  for (const Axis& a : schema.axes()) {
    axes.push_back({{"name", a.name}, {"cardinality", a.cardinality}});
  }
  j["axes"] = axes;
  j["statistics"] = stats.labels();
  return j.dump(2) + "\n";
}

}  // namespace

fs::path Simulate(const RunConfig& config, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw Error(ErrorCode::kIoError,
                "cannot create output directory " + out_dir.string());
  }
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("rep_", 0) == 0 || name == "truth") {
      fs::remove_all(entry.path());
    }
  }
  RunConfig recorded = config;
  recorded.output_dir.clear();
  const std::string config_json = ToJson(recorded);
  const World world = BuildWorld(config);
  const Spine& spine = world.spine();

  WriteText(out_dir / "config.json", config_json);
  WriteText(out_dir / "schema.json", SchemaJson(world.cef.schema, world.stats));
  {
    std::string geocodes;
    for (const BlockRecord& b : spine.blocks()) geocodes += b.geocode.raw + "\n";
    WriteText(out_dir / "geocodes.txt", geocodes);
    std::istringstream in(geocodes);
    WriteCsv(out_dir / "crosswalk.csv", Crosswalk(in).rows);
  }
  WriteBlocksCsv(out_dir / "blocks.csv", spine);
  WriteHouseholdsCsv(out_dir / "households.csv", spine, world.cef.households);
  WriteCefCsv(out_dir / "cef.csv", world.cef);
  fs::create_directories(out_dir / "truth");
  for (const LevelUnits& units : world.levels) {
    WriteLevelTable(
        out_dir / "truth" / (std::string(LevelName(units.level)) + ".csv"),
        TruthTable(world, units));
  }

  for (int r = 1; r <= config.replicates; ++r) {
    const fs::path rep = out_dir / ReplicateDirName(r);
    fs::create_directories(rep);
    const Replicate result = RunReplicate(world, config, r);
    WriteNmfCsv(rep / "nmf.csv", spine, world.queries, result.nms1);
    const auto estimates = world.estimator.EstimateAll(result.nms1);
    const auto td1 = BlockCells(world, result.td1);
    std::vector<std::vector<double>> td2, sw;
    if (result.td2) td2 = BlockCells(world, *result.td2);
    if (result.swapped) sw = BlockCells(result.swapped->data);
    for (const LevelUnits& units : world.levels) {
      const std::string level(LevelName(units.level));
      WriteLevelTable(rep / ("nm_" + level + ".csv"),
                      NmTable(world, units, estimates));
      WriteLevelTable(rep / ("td1_" + level + ".csv"),
                      BlockSumTable(world, units, td1));
      if (result.td2) {
        WriteLevelTable(rep / ("td2_" + level + ".csv"),
                        BlockSumTable(world, units, td2));
      }
      if (result.swapped) {
        WriteLevelTable(rep / ("sw_" + level + ".csv"),
                        BlockSumTable(world, units, sw));
      }
    }
    if (result.swapped) {
      const SwapStats& s = result.swapped->stats;
      nlohmann::ordered_json j = {{"selected", s.selected},
                                  {"swapped_pairs", s.swapped_pairs},
                                  {"same_tract_pairs", s.same_tract_pairs},
                                  {"unmatched", s.unmatched}};
      WriteText(rep / "swap_stats.json", j.dump(2) + "\n");
    }
  }
  WriteManifest(out_dir, config_json);
  return out_dir / "manifest.json";
}

}  // namespace dasim
