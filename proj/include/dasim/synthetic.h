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

#ifndef DASIM_SYNTHETIC_H_
#define DASIM_SYNTHETIC_H_

#include <cstdint>
#include <memory>
#include <vector>

#include "dasim/geo.h"
#include "dasim/histogram.h"

namespace dasim {

// Shape of a synthetic geography. Standard units are generated first; the
// NMF spine then splits AI/AN tracts and regroups blocks into optimized block
// groups that deliberately straddle standard block groups.
struct SpineSpec {
  int states = 1;
  // States from this index on carry no AI/AN areas.
  int states_with_aian = 1;
  int counties_per_state = 2;
  int tracts_per_county = 3;
  int block_groups_per_tract = 2;  // at most 9
  int blocks_per_block_group = 4;  // at most 98
  int obg_size = 3;                // blocks per optimized block group
  double aian_tract_fraction = 0.25;
  int vtd_size = 5;    // blocks per voting district, within a county
  int place_size = 6;  // blocks per place; every other run is placeless
};

// Throws Error(kParameterError) on out-of-range shape parameters.
std::vector<BlockRecord> GenerateSyntheticBlocks(const SpineSpec& spec,
                                                 uint64_t seed);

struct SyntheticProfile {
  double zero_block_probability = 0.1;
  // Lognormal block population among populated blocks.
  double median_block_population = 23.0;
  double log_sd = 1.1;
  int64_t max_block_population = 20000;
  // Household size weights for sizes 1, 2, ...
  std::vector<double> household_size_weights = {0.28, 0.35, 0.15, 0.13,
                                                0.06, 0.02, 0.01};
  double adult_probability = 0.6;  // per non-head member
  double hispanic_probability = 0.18;
  // Weights over race-axis categories used for alone households; the last
  // category of a 6-way axis is two-or-more.
  std::vector<double> race_weights = {0.62, 0.12, 0.02, 0.06, 0.08, 0.10};
  // Probability a tract's households mostly share one race.
  double tract_concentration = 0.6;
  std::vector<double> housing_weights = {0.97, 0.03};
};

HouseholdFile GenerateSyntheticHouseholds(const Spine& spine,
                                          const CellSchema& schema,
                                          const SyntheticProfile& profile,
                                          uint64_t seed);

// Households and the CEF built from them. Deterministic in the seed.
CefDataset GenerateSyntheticCef(std::shared_ptr<const Spine> spine,
                                const CellSchema& schema,
                                const SyntheticProfile& profile,
                                uint64_t seed);

}  // namespace dasim

#endif  // DASIM_SYNTHETIC_H_
