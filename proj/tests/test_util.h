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

#ifndef DASIM_TESTS_TEST_UTIL_H_
#define DASIM_TESTS_TEST_UTIL_H_

#include <memory>
#include <string>
#include <vector>

#include "dasim/geo.h"
#include "dasim/histogram.h"
#include "dasim/rng.h"
#include "dasim/synthetic.h"

namespace dasim::testing {

// Block record from a 15-digit GEOID and spine placement.
inline BlockRecord Block(const std::string& geoid, int aian,
                         const std::string& tract_equiv,
                         const std::string& obg, std::string vtd = "",
                         std::string place = "") {
  return {MakeGeocode(GeoId{GeoLevel::kBlock, geoid},
                      SpinePlacement{aian, "10", tract_equiv, obg}),
          std::move(vtd), std::move(place)};
}

inline std::shared_ptr<const Spine> MakeSpine(std::vector<BlockRecord> b) {
  return std::make_shared<const Spine>(Spine::Build(std::move(b)));
}

inline std::shared_ptr<const Spine> SyntheticSpine(const SpineSpec& spec,
                                                   uint64_t seed) {
  return MakeSpine(GenerateSyntheticBlocks(spec, seed));
}

inline CefDataset SyntheticCef(const SpineSpec& spec, uint64_t seed,
                               const CellSchema& schema = CellSchema::Desk()) {
  return GenerateSyntheticCef(SyntheticSpine(spec, StreamSeed(seed, "spine")),
                              schema, SyntheticProfile{},
                              StreamSeed(seed, "population"));
}

inline SpineSpec SmallSpec() {
  SpineSpec spec;
  spec.counties_per_state = 1;
  spec.tracts_per_county = 2;
  spec.block_groups_per_tract = 2;
  spec.blocks_per_block_group = 3;
  return spec;
}

}  // namespace dasim::testing

#endif  // DASIM_TESTS_TEST_UTIL_H_
