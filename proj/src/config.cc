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

#include "dasim/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "dasim/error.h"
#include "json.hpp"

namespace dasim {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void Fail(const std::string& msg) {
  throw Error(ErrorCode::kConfigError, msg);
}

void CheckKeys(const Json& j, std::string_view where,
               std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) Fail(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok |= key == a;
    if (!ok) Fail("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void Read(const Json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    Fail("bad value for '" + std::string(key) + "' in " + std::string(where));
  }
}

void ReadBool(const Json& j, const char* key, bool& out,
              std::string_view where) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_boolean()) {
    Fail("'" + std::string(key) + "' in " + std::string(where) +
         " must be true or false");
  }
  out = j.at(key).get<bool>();
}

GeoLevel ReadLevel(const Json& j, std::string_view where) {
  if (!j.is_string()) Fail(std::string(where) + ": level must be a string");
  auto level = ParseLevel(j.get<std::string>());
  if (!level) Fail(std::string(where) + ": unknown level '" +
                   j.get<std::string>() + "'");
  return *level;
}

void ParseSpine(const Json& j, SpineSpec& s) {
  CheckKeys(j, "world.spine",
            {"states", "states_with_aian", "counties_per_state",
             "tracts_per_county", "block_groups_per_tract",
             "blocks_per_block_group", "obg_size", "aian_tract_fraction",
             "vtd_size", "place_size"});
  const char* w = "world.spine";
  Read(j, "states", s.states, w);
  Read(j, "states_with_aian", s.states_with_aian, w);
  Read(j, "counties_per_state", s.counties_per_state, w);
  Read(j, "tracts_per_county", s.tracts_per_county, w);
  Read(j, "block_groups_per_tract", s.block_groups_per_tract, w);
  Read(j, "blocks_per_block_group", s.blocks_per_block_group, w);
  Read(j, "obg_size", s.obg_size, w);
  Read(j, "aian_tract_fraction", s.aian_tract_fraction, w);
  Read(j, "vtd_size", s.vtd_size, w);
  Read(j, "place_size", s.place_size, w);
}

void ParsePopulation(const Json& j, SyntheticProfile& p) {
  CheckKeys(j, "world.population",
            {"zero_block_probability", "median_block_population", "log_sd",
             "max_block_population", "household_size_weights",
             "adult_probability", "hispanic_probability", "race_weights",
             "tract_concentration", "housing_weights"});
  const char* w = "world.population";
  Read(j, "zero_block_probability", p.zero_block_probability, w);
  Read(j, "median_block_population", p.median_block_population, w);
  Read(j, "log_sd", p.log_sd, w);
  Read(j, "max_block_population", p.max_block_population, w);
  Read(j, "household_size_weights", p.household_size_weights, w);
  Read(j, "adult_probability", p.adult_probability, w);
  Read(j, "hispanic_probability", p.hispanic_probability, w);
  Read(j, "race_weights", p.race_weights, w);
  Read(j, "tract_concentration", p.tract_concentration, w);
  Read(j, "housing_weights", p.housing_weights, w);
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(p.zero_block_probability) || !prob(p.adult_probability) ||
      !prob(p.hispanic_probability) || !prob(p.tract_concentration)) {
    Fail("world.population probabilities must lie in [0, 1]");
  }
}

BudgetSchedule ParseBudget(const Json& j) {
  if (j.is_string()) {
    if (j == "default") return BudgetSchedule::Default();
    if (j == "zero") return BudgetSchedule::Zero();
    Fail("budget must be \"default\", \"zero\" or an object");
  }
  if (!j.is_object()) Fail("budget must be an object");
  BudgetSchedule b = BudgetSchedule::Default();
  const QueryGroup groups[] = {QueryGroup::kDetail, QueryGroup::kTotal,
                               QueryGroup::kMarginal};
  for (const auto& [key, value] : j.items()) {
    auto level = ParseLevel(key);
    if (!level || !IsOnSpine(*level)) {
      Fail("budget key '" + key + "' is not a spine level");
    }
    try {
      if (value.is_number()) {
        for (QueryGroup g : groups) b.Set(*level, g, value.get<double>());
      } else {
        CheckKeys(value, "budget." + key, {"detail", "total", "marginal"});
        for (QueryGroup g : groups) {
          const std::string name(QueryGroupName(g));
          if (value.contains(name)) {
            if (!value.at(name).is_number()) {
              Fail("budget." + key + "." + name + " must be a number");
            }
            b.Set(*level, g, value.at(name).get<double>());
          }
        }
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfigError) throw;
      Fail("budget." + key + ": " + e.what());
    }
  }
  return b;
}

void ParsePostprocess(const Json& j, PostProcessConfig& p) {
  CheckKeys(j, "postprocess", {"invariants", "nonneg", "integerize"});
  ReadBool(j, "nonneg", p.nonneg, "postprocess");
  ReadBool(j, "integerize", p.integerize, "postprocess");
  if (j.contains("invariants")) {
    const Json& list = j.at("invariants");
    if (!list.is_array()) Fail("postprocess.invariants must be a list");
    p.invariants.clear();
    for (const Json& inv : list) {
      CheckKeys(inv, "postprocess.invariants[]", {"level", "statistic"});
      if (!inv.contains("level") || !inv.contains("statistic") ||
          !inv.at("statistic").is_string()) {
        Fail("an invariant needs a level and a statistic");
      }
      const GeoLevel level = ReadLevel(inv.at("level"), "invariant");
      if (!IsOnSpine(level)) Fail("invariant level must be on the spine");
      p.invariants.push_back({level, inv.at("statistic").get<std::string>()});
    }
  }
}

void ParseSwap(const Json& j, RunConfig& c) {
  CheckKeys(j, "swap",
            {"enabled", "base_rate", "risk_weight", "risk_floor",
             "risk_exponent", "pairing_scope", "same_tract_preference"});
  ReadBool(j, "enabled", c.swap_enabled, "swap");
  Read(j, "base_rate", c.swap.base_rate, "swap");
  Read(j, "risk_weight", c.swap.risk_weight, "swap");
  Read(j, "risk_floor", c.swap.risk_floor, "swap");
  Read(j, "risk_exponent", c.swap.risk_exponent, "swap");
  Read(j, "same_tract_preference", c.swap.same_tract_preference, "swap");
  if (j.contains("pairing_scope")) {
    c.swap.pairing_scope = ReadLevel(j.at("pairing_scope"), "swap");
  }
  try {
    ValidateSwapConfig(c.swap);
  } catch (const Error& e) {
    Fail(std::string("swap: ") + e.what());
  }
}

std::string LevelList(const std::vector<GeoLevel>& levels) {
  std::string out;
  for (GeoLevel l : levels) out += std::string(LevelName(l)) + " ";
  return out;
}

}  // namespace

CellSchema RunConfig::Schema() const {
  return cells == "full" ? CellSchema::Full() : CellSchema::Desk();
}

RunConfig ParseRunConfig(std::string_view text,
                         const std::filesystem::path& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    Fail(std::string("config is not valid JSON: ") + e.what());
  }
  CheckKeys(j, "config",
            {"schema_version", "seed", "replicates", "topdown_runs",
             "output_dir", "world", "cells", "budget", "queries",
             "postprocess", "swap", "report_levels"});
  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer()) {
    Fail("config needs an integer schema_version");
  }
  if (j.at("schema_version").get<int>() != kConfigSchemaVersion) {
    Fail("unsupported schema_version " +
         std::to_string(j.at("schema_version").get<int>()));
  }
  RunConfig c;
  if (j.contains("seed") && !j.at("seed").is_number_unsigned()) {
    Fail("seed must be a non-negative integer");
  }
  Read(j, "seed", c.seed, "config");
  Read(j, "replicates", c.replicates, "config");
  Read(j, "topdown_runs", c.topdown_runs, "config");
  if (c.replicates < 1) Fail("replicates must be at least 1");
  if (c.topdown_runs != 1 && c.topdown_runs != 2) {
    Fail("topdown_runs must be 1 or 2");
  }
  if (j.contains("output_dir")) {
    std::string dir;
    Read(j, "output_dir", dir, "config");
    c.output_dir = dir;
  }
  if (j.contains("world")) {
    const Json& w = j.at("world");
    CheckKeys(w, "world",
              {"spine", "population", "blocks_file", "households_file"});
    if (w.contains("spine")) ParseSpine(w.at("spine"), c.spine);
    if (w.contains("population")) {
      ParsePopulation(w.at("population"), c.population);
    }
    std::string blocks, households;
    Read(w, "blocks_file", blocks, "world");
    Read(w, "households_file", households, "world");
    if (blocks.empty() != households.empty()) {
      Fail("world.blocks_file and world.households_file go together");
    }
    if (!blocks.empty()) {
      c.blocks_file = base_dir / blocks;
      c.households_file = base_dir / households;
      for (const auto& p : {c.blocks_file, c.households_file}) {
        if (!std::filesystem::is_regular_file(p)) {
          Fail("referenced file does not exist: " + p.string());
        }
      }
    }
  }
  Read(j, "cells", c.cells, "config");
  if (c.cells != "desk" && c.cells != "full") {
    Fail("cells must be \"desk\" or \"full\"");
  }
  if (j.contains("budget")) c.budget = ParseBudget(j.at("budget"));
  if (j.contains("queries")) {
    const Json& q = j.at("queries");
    CheckKeys(q, "queries", {"detail", "total", "marginals"});
    ReadBool(q, "detail", c.queries.detail, "queries");
    ReadBool(q, "total", c.queries.total, "queries");
    ReadBool(q, "marginals", c.queries.marginals, "queries");
    if (!c.queries.detail && !c.queries.total && !c.queries.marginals) {
      Fail("at least one query family is required");
    }
  }
  if (j.contains("postprocess")) ParsePostprocess(j.at("postprocess"), c.postprocess);
  if (j.contains("swap")) ParseSwap(j.at("swap"), c);
  if (j.contains("report_levels")) {
    const Json& list = j.at("report_levels");
    if (!list.is_array() || list.empty()) {
      Fail("report_levels must be a non-empty list");
    }
    c.report_levels.clear();
    for (const Json& l : list) {
      const GeoLevel level = ReadLevel(l, "report_levels");
      if (level == GeoLevel::kOptBlockGroup) {
        Fail("report_levels take census geographies, not " +
             LevelList({level}));
      }
      c.report_levels.push_back(level);
    }
  }
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseRunConfig(buffer.str(), path.parent_path());
}

std::string ToJson(const RunConfig& c) {
  Json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["replicates"] = c.replicates;
  j["topdown_runs"] = c.topdown_runs;
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir.string();
  const SpineSpec& s = c.spine;
  const SyntheticProfile& p = c.population;
  Json world;
  world["spine"] = {{"states", s.states},
                    {"states_with_aian", s.states_with_aian},
                    {"counties_per_state", s.counties_per_state},
                    {"tracts_per_county", s.tracts_per_county},
                    {"block_groups_per_tract", s.block_groups_per_tract},
                    {"blocks_per_block_group", s.blocks_per_block_group},
                    {"obg_size", s.obg_size},
                    {"aian_tract_fraction", s.aian_tract_fraction},
                    {"vtd_size", s.vtd_size},
                    {"place_size", s.place_size}};
  world["population"] = {
      {"zero_block_probability", p.zero_block_probability},
      {"median_block_population", p.median_block_population},
      {"log_sd", p.log_sd},
      {"max_block_population", p.max_block_population},
      {"household_size_weights", p.household_size_weights},
      {"adult_probability", p.adult_probability},
      {"hispanic_probability", p.hispanic_probability},
      {"race_weights", p.race_weights},
      {"tract_concentration", p.tract_concentration},
      {"housing_weights", p.housing_weights}};
  if (!c.blocks_file.empty()) {
    world["blocks_file"] = c.blocks_file.string();
    world["households_file"] = c.households_file.string();
  }
  j["world"] = world;
  j["cells"] = c.cells;
  Json budget = Json::object();
  for (const auto& [level, v] : c.budget.entries()) {
    budget[std::string(LevelName(level))] = {
        {"detail", v[0]}, {"total", v[1]}, {"marginal", v[2]}};
  }
  j["budget"] = budget;
  j["queries"] = {{"detail", c.queries.detail},
                  {"total", c.queries.total},
                  {"marginals", c.queries.marginals}};
  Json invariants = Json::array();
  for (const Invariant& inv : c.postprocess.invariants) {
    invariants.push_back(
        {{"level", std::string(LevelName(inv.level))},
         {"statistic", inv.statistic}});
  }
  j["postprocess"] = {{"invariants", invariants},
                      {"nonneg", c.postprocess.nonneg},
                      {"integerize", c.postprocess.integerize}};
  j["swap"] = {{"enabled", c.swap_enabled},
               {"base_rate", c.swap.base_rate},
               {"risk_weight", c.swap.risk_weight},
               {"risk_floor", c.swap.risk_floor},
               {"risk_exponent", c.swap.risk_exponent},
               {"pairing_scope", std::string(LevelName(c.swap.pairing_scope))},
               {"same_tract_preference", c.swap.same_tract_preference}};
  Json levels = Json::array();
  for (GeoLevel l : c.report_levels) levels.push_back(std::string(LevelName(l)));
  j["report_levels"] = levels;
  return j.dump(2) + "\n";
}

}  // namespace dasim
