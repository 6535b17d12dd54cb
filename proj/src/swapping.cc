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

#include "dasim/swapping.h"

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dasim/error.h"
#include "dasim/rng.h"

namespace dasim {

namespace {

bool IsProbability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void ValidateSwapConfig(const SwapConfig& cfg) {
  if (!IsProbability(cfg.base_rate) || !IsProbability(cfg.risk_floor) ||
      !IsProbability(cfg.same_tract_preference)) {
    throw Error(ErrorCode::kParameterError,
                "swap probabilities must lie in [0, 1]");
  }
  if (!(cfg.risk_weight >= 0.0) || !(cfg.risk_exponent >= 0.0)) {
    throw Error(ErrorCode::kParameterError,
                "risk_weight and risk_exponent must be non-negative");
  }
}

double RiskScore(int size, int same_composition, int64_t block_pop,
                 const SwapConfig& cfg) {
  if (size < 1 || block_pop < size) {
    throw Error(ErrorCode::kParameterError,
                "block population must be at least the household size");
  }
  if (same_composition < 1) {
    throw Error(ErrorCode::kParameterError,
                "same-composition count includes the household itself");
  }
  const double share = static_cast<double>(size) / block_pop;
  const double raw = std::pow(share, cfg.risk_exponent) / same_composition;
  return std::max(cfg.risk_floor, std::min(1.0, raw));
}

SwappedDataset Swap(const CefDataset& cef, const SwapConfig& cfg) {
  ValidateSwapConfig(cfg);
  const Spine& spine = *cef.spine;
  const auto& hh = cef.households.households;
  const std::vector<Histogram> blocks =
      BlockHistograms(cef.households, spine.num_blocks(), cef.schema);
  for (size_t b = 0; b < blocks.size(); ++b) {
    if (!(blocks[b] == cef.at(spine.block_node(static_cast<BlockIndex>(b))))) {
      throw Error(ErrorCode::kSchemaError,
                  "household file disagrees with the CEF in block " +
                      spine.block(static_cast<BlockIndex>(b)).geocode.raw);
    }
  }

  // Per-block populations and composition multiplicities.
  std::vector<int64_t> block_pop(spine.num_blocks(), 0);
  std::map<std::pair<BlockIndex, std::vector<std::pair<int32_t, int32_t>>>,
           int>
      same;
  for (const Household& h : hh) {
    block_pop[h.block] += h.size;
    ++same[{h.block, h.composition}];
  }

  // Households grouped by pairing unit, in file order.
  std::map<std::string, std::vector<size_t>> units;
  std::vector<std::string> tract(hh.size());
  for (size_t i = 0; i < hh.size(); ++i) {
    const auto unit = spine.StandardUnitOf(hh[i].block, cfg.pairing_scope);
    units[unit ? unit->code : std::string()].push_back(i);
    tract[i] = spine.StandardUnitOf(hh[i].block, GeoLevel::kTract)->code;
  }

  std::vector<BlockIndex> location(hh.size());
  for (size_t i = 0; i < hh.size(); ++i) location[i] = hh[i].block;
  std::vector<char> done(hh.size(), 0);
  SwapStats stats;

  for (const auto& [code, members] : units) {
    Rng rng = MakeStream(cfg.seed, "swap:" + std::string(LevelName(
                                                  cfg.pairing_scope)) +
                                       ":" + code);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::map<std::pair<int, int>, std::vector<size_t>> by_shape;
    for (size_t i : members) by_shape[{hh[i].size, hh[i].adults}].push_back(i);

    for (size_t i : members) {
      const Household& h = hh[i];
      const double risk =
          RiskScore(h.size, same[{h.block, h.composition}], block_pop[h.block],
                    cfg);
      const double p =
          std::min(1.0, cfg.base_rate * (1.0 + cfg.risk_weight * risk));
      const double draw = unit(rng);
      if (done[i] || draw >= p) continue;
      ++stats.selected;

      std::vector<size_t> near, any;
      for (size_t j : by_shape[{h.size, h.adults}]) {
        if (done[j] || j == i || hh[j].block == h.block) continue;
        any.push_back(j);
        if (tract[j] == tract[i]) near.push_back(j);
      }
      if (any.empty()) {
        ++stats.unmatched;
        continue;
      }
      const bool local = unit(rng) < cfg.same_tract_preference;
      const std::vector<size_t>& pool = (local && !near.empty()) ? near : any;
      std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
      const size_t j = pool[pick(rng)];
      std::swap(location[i], location[j]);
      done[i] = done[j] = 1;
      ++stats.swapped_pairs;
      if (tract[i] == tract[j]) ++stats.same_tract_pairs;
    }
  }

  HouseholdFile moved = cef.households;
  for (size_t i = 0; i < hh.size(); ++i) {
    moved.households[i].block = location[i];
  }
  std::vector<Histogram> swapped =
      BlockHistograms(moved, spine.num_blocks(), cef.schema);
  return {MakeCefDataset(cef.spine, cef.schema, std::move(swapped),
                         std::move(moved)),
          stats};
}

}  // namespace dasim
