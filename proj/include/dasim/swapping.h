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

#ifndef DASIM_SWAPPING_H_
#define DASIM_SWAPPING_H_

#include <cstdint>

#include "dasim/geo.h"
#include "dasim/histogram.h"

namespace dasim {

struct SwapConfig {
  // Selection probability is min(1, base_rate * (1 + risk_weight * risk)).
  double base_rate = 0.02;
  double risk_weight = 4.0;
  // Risk score shape: max(risk_floor, (size / block_pop)^risk_exponent /
  // same-composition count).
  double risk_floor = 0.02;
  double risk_exponent = 0.5;
  // Partners come from the same unit of this level.
  GeoLevel pairing_scope = GeoLevel::kCounty;
  // Probability of drawing the partner from the household's own tract when
  // an eligible one exists there.
  double same_tract_preference = 0.8;
  uint64_t seed = 0;
};

// Throws Error(kParameterError) for probabilities outside [0, 1] or negative
// shape parameters.
void ValidateSwapConfig(const SwapConfig& cfg);

// Disclosure risk in [risk_floor, 1]. same_composition counts households in
// the block with this household's composition, itself included. Throws
// Error(kParameterError) when block_pop < size or same_composition < 1.
double RiskScore(int size, int same_composition, int64_t block_pop,
                 const SwapConfig& cfg = {});

struct SwapStats {
  int64_t selected = 0;
  int64_t swapped_pairs = 0;
  int64_t same_tract_pairs = 0;
  int64_t unmatched = 0;
};

struct SwappedDataset {
  CefDataset data;  // X^sw with the relocated households
  SwapStats stats;
};

// Selected households trade blocks with a household of equal size and adult
// count in a different block of the same pairing unit; compositions travel
// with the household. Households without a partner are skipped and counted.
// Throws Error(kSchemaError) if the household file disagrees with the CEF.
SwappedDataset Swap(const CefDataset& cef, const SwapConfig& cfg);

}  // namespace dasim

#endif  // DASIM_SWAPPING_H_
