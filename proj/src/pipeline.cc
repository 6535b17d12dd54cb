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

#include "dasim/pipeline.h"

#include <algorithm>

#include "dasim/artifacts.h"
#include "dasim/error.h"
#include "dasim/rng.h"
#include "dasim/synthetic.h"

namespace dasim {

LevelUnits MakeLevelUnits(const Spine& spine, GeoLevel level) {
  LevelUnits out;
  out.level = level;
  out.units = spine.StandardUnits(level);
  for (const GeoId& id : out.units) {
    out.blocks.push_back(spine.BlocksOf(id));
    out.parts.push_back(ComposeBlocks(spine, out.blocks.back()));
  }
  return out;
}

World::World(CefDataset cef_in, QueryMatrix queries_in,
             AggregationMatrix stats_in, const std::vector<GeoLevel>& lvls)
    : cef(std::move(cef_in)),
      queries(std::move(queries_in)),
      stats(std::move(stats_in)),
      estimator(queries, stats) {
  for (GeoLevel level : lvls) levels.push_back(MakeLevelUnits(spine(), level));
}

const LevelUnits& World::units(GeoLevel level) const {
  for (const LevelUnits& u : levels) {
    if (u.level == level) return u;
  }
  throw Error(ErrorCode::kUsageError,
              "level " + std::string(LevelName(level)) + " is not reported");
}

World BuildWorld(const RunConfig& config) {
  const CellSchema schema = config.Schema();
  CefDataset cef;
  if (!config.blocks_file.empty()) {
    cef = LoadWorldFiles(config.blocks_file, config.households_file, schema);
  } else {
    auto spine = std::make_shared<const Spine>(Spine::Build(
        GenerateSyntheticBlocks(config.spine, StreamSeed(config.seed, "spine"))));
    cef = GenerateSyntheticCef(spine, schema, config.population,
                               StreamSeed(config.seed, "population"));
  }
  QueryMatrix queries =
      QueryMatrix::Build(schema, config.budget, config.queries.detail,
                         config.queries.total, config.queries.marginals);
  return World(std::move(cef), std::move(queries),
               AggregationMatrix::Default(schema), config.report_levels);
}

int LevelTable::StatisticIndex(std::string_view statistic) const {
  for (size_t s = 0; s < statistics.size(); ++s) {
    if (statistics[s] == statistic) return static_cast<int>(s);
  }
  throw Error(ErrorCode::kUsageError,
              "unknown statistic '" + std::string(statistic) + "'");
}

Column LevelTable::ToColumn(std::string_view statistic, std::string run) const {
  const int s = StatisticIndex(statistic);
  Column c{std::move(run), std::string(statistic), {}};
  for (size_t u = 0; u < ids.size(); ++u) c.values[ids[u]] = values[u][s];
  return c;
}

MeasuredColumn LevelTable::ToMeasuredColumn(std::string_view statistic,
                                            std::string run) const {
  if (variances.size() != values.size()) {
    throw Error(ErrorCode::kUsageError, "table carries no variances");
  }
  const int s = StatisticIndex(statistic);
  MeasuredColumn c{std::move(run), std::string(statistic), {}};
  for (size_t u = 0; u < ids.size(); ++u) {
    c.values[ids[u]] = Measured{values[u][s], variances[u][s]};
  }
  return c;
}

namespace {

LevelTable EmptyTable(const World& world, const LevelUnits& units) {
  LevelTable t;
  t.level = units.level;
  t.statistics = world.stats.labels();
  for (const GeoId& id : units.units) t.ids.push_back(id.code);
  return t;
}

}  // namespace

LevelTable TruthTable(const World& world, const LevelUnits& units) {
  LevelTable t = EmptyTable(world, units);
  for (const auto& blocks : units.blocks) {
    const std::vector<int64_t> y = world.stats.Apply(world.cef.BlockSum(blocks));
    t.values.emplace_back(y.begin(), y.end());
  }
  return t;
}

LevelTable NmTable(const World& world, const LevelUnits& units,
                   const std::vector<std::vector<Measured>>& node_estimates) {
  LevelTable t = EmptyTable(world, units);
  for (const auto& parts : units.parts) {
    const std::vector<Measured> m = world.estimator.Compose(node_estimates, parts);
    std::vector<double> v, var;
    for (const Measured& e : m) {
      v.push_back(e.value);
      var.push_back(e.variance);
    }
    t.values.push_back(std::move(v));
    t.variances.push_back(std::move(var));
  }
  return t;
}

LevelTable BlockSumTable(const World& world, const LevelUnits& units,
                         const std::vector<std::vector<double>>& blocks) {
  LevelTable t = EmptyTable(world, units);
  const int cells = world.cef.schema.size();
  std::vector<double> x(cells);
  for (const auto& members : units.blocks) {
    std::fill(x.begin(), x.end(), 0.0);
    for (BlockIndex b : members) {
      const std::vector<double>& counts = blocks.at(b);
      for (int c = 0; c < cells; ++c) x[c] += counts[c];
    }
    t.values.push_back(world.stats.Apply(x));
  }
  return t;
}

std::vector<std::vector<double>> BlockCells(const World& world,
                                            const PostProcessedDataset& td) {
  std::vector<std::vector<double>> out(world.spine().num_blocks());
  for (size_t b = 0; b < out.size(); ++b) {
    out[b] = td.node_counts.at(
        world.spine().block_node(static_cast<BlockIndex>(b)));
  }
  return out;
}

std::vector<std::vector<double>> BlockCells(const CefDataset& data) {
  std::vector<std::vector<double>> out(data.spine->num_blocks());
  for (size_t b = 0; b < out.size(); ++b) {
    const Histogram& h =
        data.at(data.spine->block_node(static_cast<BlockIndex>(b)));
    out[b].assign(h.counts().begin(), h.counts().end());
  }
  return out;
}

ReplicateSeeds SeedsFor(uint64_t seed, int replicate) {
  const std::string tag = "replicate:" + std::to_string(replicate);
  ReplicateSeeds s{StreamSeed(seed, tag + ":noise1"),
                   StreamSeed(seed, tag + ":noise2"),
                   StreamSeed(seed, tag + ":swap")};
  if (s.noise1 == s.noise2) ++s.noise2;
  return s;
}

Replicate RunReplicate(const World& world, const RunConfig& config,
                       int replicate) {
  const ReplicateSeeds seeds = SeedsFor(config.seed, replicate);
  Replicate r;
  if (config.topdown_runs == 2) {
    auto [first, second] = RunTwice(world.cef, world.queries, world.stats,
                                    config.postprocess, seeds.noise1,
                                    seeds.noise2);
    r.nms1 = std::move(first.nms);
    r.td1 = std::move(first.td);
    r.nms2 = std::move(second.nms);
    r.td2 = std::move(second.td);
  } else {
    r.nms1 = MakeNoisyMeasurements(world.cef, world.queries, seeds.noise1);
    r.td1 = TopDownPostprocess(r.nms1, world.cef, world.queries, world.stats,
                               config.postprocess);
  }
  if (config.swap_enabled) {
    SwapConfig swap = config.swap;
    swap.seed = seeds.swap;
    r.swapped = Swap(world.cef, swap);
  }
  return r;
}

}  // namespace dasim
