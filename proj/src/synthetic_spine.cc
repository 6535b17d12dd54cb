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

#include <cstdio>
#include <map>
#include <string>
#include <tuple>

#include "dasim/error.h"
#include "dasim/rng.h"
#include "dasim/synthetic.h"

namespace dasim {

namespace {

std::string Digits(int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*d", width, value);
  return buf;
}

void Require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kParameterError, what);
}

}  // namespace

std::vector<BlockRecord> GenerateSyntheticBlocks(const SpineSpec& spec,
                                                 uint64_t seed) {
  Require(spec.states >= 1 && spec.states <= 40, "states must be in [1, 40]");
  Require(spec.counties_per_state >= 1 && spec.counties_per_state <= 400,
          "counties_per_state must be in [1, 400]");
  Require(spec.tracts_per_county >= 1 && spec.tracts_per_county <= 499,
          "tracts_per_county must be in [1, 499]");
  Require(spec.block_groups_per_tract >= 1 && spec.block_groups_per_tract <= 9,
          "block_groups_per_tract must be in [1, 9]");
  Require(spec.blocks_per_block_group >= 1 &&
              spec.blocks_per_block_group <= 98,
          "blocks_per_block_group must be in [1, 98]");
  Require(spec.obg_size >= 1, "obg_size must be positive");
  Require(spec.vtd_size >= 1, "vtd_size must be positive");
  Require(spec.place_size >= 1, "place_size must be positive");
  Require(spec.aian_tract_fraction >= 0.0 && spec.aian_tract_fraction <= 1.0,
          "aian_tract_fraction must be a probability");

  Rng rng = MakeStream(seed, "spine");
  std::bernoulli_distribution split_tract(spec.aian_tract_fraction);

  struct Pending {
    GeoId geoid;
    int aian = 0;
  };
  std::vector<Pending> pending;

  for (int s = 0; s < spec.states; ++s) {
    const std::string state = Digits(53 + s, 2);
    for (int c = 0; c < spec.counties_per_state; ++c) {
      const std::string county = Digits(2 * c + 1, 3);
      for (int t = 0; t < spec.tracts_per_county; ++t) {
        const std::string tract = Digits((9501 + t) * 100, 6);
        const int n = spec.block_groups_per_tract * spec.blocks_per_block_group;
        int aian_first = n, aian_last = n;  // empty range
        if (s < spec.states_with_aian && split_tract(rng)) {
          if (n == 1) {
            aian_first = 0;
            aian_last = 1;
          } else {
            std::uniform_int_distribution<int> len(1, n - 1);
            const int l = len(rng);
            std::uniform_int_distribution<int> start(0, n - l);
            aian_first = start(rng);
            aian_last = aian_first + l;
          }
        }
        int k = 0;
        for (int g = 1; g <= spec.block_groups_per_tract; ++g) {
          for (int b = 0; b < spec.blocks_per_block_group; ++b, ++k) {
            const std::string block =
                std::to_string(g) + Digits(10 * (b + 1), 3);
            pending.push_back(
                {GeoId{GeoLevel::kBlock, state + county + tract + block},
                 (k >= aian_first && k < aian_last) ? 1 : 0});
          }
        }
      }
    }
  }

  // NMF placement: tract-equivalents numbered within each (AI/AN, county)
  // fragment, optimized block groups chunked within each tract fragment.
  std::map<std::tuple<int, std::string>, int> next_tract;
  std::map<std::tuple<int, std::string>, int> tract_equiv;
  std::map<std::tuple<int, std::string>, int> obg_fill;
  std::vector<BlockRecord> records;
  records.reserve(pending.size());
  for (const Pending& p : pending) {
    const std::string county_key = p.geoid.code.substr(0, 5);
    const std::string tract_key = p.geoid.code.substr(0, 11);
    auto [it, inserted] = tract_equiv.try_emplace({p.aian, tract_key}, 0);
    if (inserted) it->second = ++next_tract[{p.aian, county_key}];
    const int slot = obg_fill[{p.aian, tract_key}]++;
    SpinePlacement placement;
    placement.aian_flag = p.aian;
    placement.tract_equiv = Digits(it->second, 4);
    placement.opt_blockgroup_equiv = Digits(100 + slot / spec.obg_size + 1, 3);
    records.push_back(BlockRecord{MakeGeocode(p.geoid, placement), "", ""});
  }

  // Voting districts run through each county in block order, offset by half
  // a district so they cut across block groups.
  std::map<std::string, int> county_pos;
  std::map<std::string, int> state_pos;
  for (BlockRecord& rec : records) {
    const std::string code = ToGeoid(rec.geocode).code;
    const int cpos = county_pos[code.substr(0, 5)]++ + spec.vtd_size / 2;
    rec.vtd = Digits(cpos / spec.vtd_size + 1, 6);
    const int spos = state_pos[code.substr(0, 2)]++ + spec.place_size / 3;
    const int run = spos / spec.place_size;
    if (run % 2 == 0) rec.place = Digits(1000 + run * 10, 5);
  }
  return records;
}

}  // namespace dasim
