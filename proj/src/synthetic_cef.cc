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
#include <bit>
#include <cmath>
#include <map>
#include <random>

#include "dasim/error.h"
#include "dasim/rng.h"
#include "dasim/synthetic.h"

namespace dasim {

namespace {

// Race index of an alone household of category `category` (0-based over the
// profile's race weights).
int AloneRaceIndex(int race_cardinality, int category) {
  if (race_cardinality == 63) {
    // Single-bit codes: white=1, black=2, aian=4, asian=8, nhpi=16, other=32.
    return category < 6 ? (1 << category) - 1 : 2;  // fall back to a pair
  }
  return std::min(category, race_cardinality - 1);
}

int MultiRaceIndex(int race_cardinality, Rng& rng) {
  if (race_cardinality == 63) {
    // Any code with two or more bits set.
    static const std::vector<int> kMulti = [] {
      std::vector<int> v;
      for (int code = 1; code <= 63; ++code) {
        if (std::popcount(static_cast<unsigned>(code)) >= 2) v.push_back(code - 1);
      }
      return v;
    }();
    std::uniform_int_distribution<size_t> pick(0, kMulti.size() - 1);
    return kMulti[pick(rng)];
  }
  return race_cardinality - 1;
}

}  // namespace

HouseholdFile GenerateSyntheticHouseholds(const Spine& spine,
                                          const CellSchema& schema,
                                          const SyntheticProfile& profile,
                                          uint64_t seed) {
  if (profile.zero_block_probability < 0.0 ||
      profile.zero_block_probability > 1.0 ||
      profile.median_block_population <= 0.0 || profile.log_sd < 0.0 ||
      profile.household_size_weights.empty() ||
      profile.race_weights.empty() || profile.housing_weights.empty()) {
    throw Error(ErrorCode::kParameterError, "invalid synthetic profile");
  }
  const auto va_axis = schema.AxisIndex("voting_age");
  const auto hisp_axis = schema.AxisIndex("hispanic");
  const auto race_axis = schema.AxisIndex("race");
  const auto housing_axis = schema.AxisIndex("housing");
  const int race_card =
      race_axis ? schema.axes()[*race_axis].cardinality : 1;
  const int housing_card =
      housing_axis ? schema.axes()[*housing_axis].cardinality : 1;

  std::discrete_distribution<int> size_dist(
      profile.household_size_weights.begin(),
      profile.household_size_weights.end());
  std::discrete_distribution<int> race_dist(profile.race_weights.begin(),
                                            profile.race_weights.end());
  std::discrete_distribution<int> housing_dist(
      profile.housing_weights.begin(), profile.housing_weights.end());
  std::lognormal_distribution<double> pop_dist(
      std::log(profile.median_block_population), profile.log_sd);
  std::bernoulli_distribution zero_block(profile.zero_block_probability);

  HouseholdFile file;
  std::map<std::string, std::pair<int, double>> tract_mix;  // race, hisp p
  for (size_t b = 0; b < spine.num_blocks(); ++b) {
    const GeoCode& g = spine.block(static_cast<BlockIndex>(b)).geocode;
    Rng rng = MakeStream(seed, g.raw);

    // Tract-level composition so neighbouring blocks look alike.
    const std::string tract = ToGeoid(g).code.substr(0, 11);
    auto mix_it = tract_mix.find(tract);
    if (mix_it == tract_mix.end()) {
      Rng tract_rng = MakeStream(seed, "tract:" + tract);
      const int dominant = race_dist(tract_rng);
      std::uniform_real_distribution<double> jitter(0.25, 1.75);
      const double hisp =
          std::min(0.95, profile.hispanic_probability * jitter(tract_rng));
      mix_it = tract_mix.emplace(tract, std::make_pair(dominant, hisp)).first;
    }
    const auto [dominant_race, hispanic_p] = mix_it->second;

    int64_t population = 0;
    if (!zero_block(rng)) {
      population = std::clamp<int64_t>(std::llround(pop_dist(rng)), 1,
                                       profile.max_block_population);
    }
    std::bernoulli_distribution concentrated(profile.tract_concentration);
    std::bernoulli_distribution hispanic(hispanic_p);
    std::bernoulli_distribution adult(profile.adult_probability);

    int64_t placed = 0;
    while (placed < population) {
      Household h;
      h.block = static_cast<BlockIndex>(b);
      h.size = static_cast<int>(
          std::min<int64_t>(size_dist(rng) + 1, population - placed));
      placed += h.size;
      h.adults = 1;
      for (int m = 1; m < h.size; ++m) h.adults += adult(rng) ? 1 : 0;

      int category = concentrated(rng) ? dominant_race : race_dist(rng);
      const bool multi = race_card == 6 ? category == 5
                                        : category == 5 && race_card == 63;
      int race = multi ? MultiRaceIndex(race_card, rng)
                       : AloneRaceIndex(race_card, category);
      const int hisp = hispanic(rng) ? 1 : 0;
      const int housing = std::min(housing_dist(rng), housing_card - 1);

      std::map<int32_t, int32_t> cells;
      for (int m = 0; m < h.size; ++m) {
        std::vector<int> coords(schema.axes().size(), 0);
        if (va_axis) coords[*va_axis] = m < h.adults ? 1 : 0;
        if (hisp_axis) coords[*hisp_axis] = hisp;
        if (race_axis) coords[*race_axis] = race;
        if (housing_axis) coords[*housing_axis] = housing;
        ++cells[schema.Index(coords)];
      }
      h.composition.assign(cells.begin(), cells.end());
      file.households.push_back(std::move(h));
    }
  }
  return file;
}

CefDataset GenerateSyntheticCef(std::shared_ptr<const Spine> spine,
                                const CellSchema& schema,
                                const SyntheticProfile& profile,
                                uint64_t seed) {
  HouseholdFile households =
      GenerateSyntheticHouseholds(*spine, schema, profile, seed);
  std::vector<Histogram> blocks =
      BlockHistograms(households, spine->num_blocks(), schema);
  return MakeCefDataset(std::move(spine), schema, std::move(blocks),
                        std::move(households));
}

}  // namespace dasim
