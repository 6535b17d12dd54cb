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

#ifndef DASIM_PIPELINE_H_
#define DASIM_PIPELINE_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dasim/config.h"
#include "dasim/estimators.h"
#include "dasim/geo.h"
#include "dasim/histogram.h"
#include "dasim/noise.h"
#include "dasim/swapping.h"
#include "dasim/topdown.h"

namespace dasim {

// The census geographies of one level with their blocks and their
// composition from spine units.
struct LevelUnits {
  GeoLevel level = GeoLevel::kBlock;
  std::vector<GeoId> units;
  std::vector<std::vector<BlockIndex>> blocks;
  std::vector<std::vector<NodeIndex>> parts;
};

LevelUnits MakeLevelUnits(const Spine& spine, GeoLevel level);

// A fixed CEF with its measurement design.
struct World {
  World(CefDataset cef, QueryMatrix queries, AggregationMatrix stats,
        const std::vector<GeoLevel>& levels);

  CefDataset cef;
  QueryMatrix queries;
  AggregationMatrix stats;
  NmEstimator estimator;
  std::vector<LevelUnits> levels;

  const Spine& spine() const { return *cef.spine; }
  const LevelUnits& units(GeoLevel level) const;
};

// Synthetic or file-backed world as the config describes.
World BuildWorld(const RunConfig& config);

// Published values of every statistic for the units of one level.
struct LevelTable {
  GeoLevel level = GeoLevel::kBlock;
  std::vector<std::string> ids;
  std::vector<std::string> statistics;
  std::vector<std::vector<double>> values;     // [unit][statistic]
  std::vector<std::vector<double>> variances;  // NMF tables only

  int StatisticIndex(std::string_view statistic) const;
  Column ToColumn(std::string_view statistic, std::string run) const;
  MeasuredColumn ToMeasuredColumn(std::string_view statistic,
                                  std::string run) const;
};

LevelTable TruthTable(const World& world, const LevelUnits& units);
// Inverse-variance NMF estimates composed from spine units.
LevelTable NmTable(const World& world, const LevelUnits& units,
                   const std::vector<std::vector<Measured>>& node_estimates);
// Sums per-block cell counts (post-processed or swapped) over each unit.
LevelTable BlockSumTable(const World& world, const LevelUnits& units,
                         const std::vector<std::vector<double>>& blocks);

// Per-block cell counts, indexed by BlockIndex.
std::vector<std::vector<double>> BlockCells(const World& world,
                                            const PostProcessedDataset& td);
std::vector<std::vector<double>> BlockCells(const CefDataset& data);

struct ReplicateSeeds {
  uint64_t noise1 = 0;
  uint64_t noise2 = 0;
  uint64_t swap = 0;
};

// Distinct per-replicate seeds derived from the run seed.
ReplicateSeeds SeedsFor(uint64_t seed, int replicate);

struct Replicate {
  NoisyMeasurements nms1;
  PostProcessedDataset td1;
  std::optional<NoisyMeasurements> nms2;
  std::optional<PostProcessedDataset> td2;
  std::optional<SwappedDataset> swapped;
};

Replicate RunReplicate(const World& world, const RunConfig& config,
                       int replicate);

}  // namespace dasim

#endif  // DASIM_PIPELINE_H_
