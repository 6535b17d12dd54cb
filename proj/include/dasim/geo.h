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

#ifndef DASIM_GEO_H_
#define DASIM_GEO_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dasim {

// Census geographic levels. The noisy-measurement (NMF) spine is
// Nation > State > County > Tract > OptBlockGroup > Block, with every
// sub-state unit split into AI/AN and non-AI/AN fragments. BlockGroup, VTD
// and Place are off-spine and must be composed from spine units.
enum class GeoLevel {
  kBlock,
  kOptBlockGroup,
  kBlockGroup,
  kTract,
  kCounty,
  kState,
  kVtd,
  kPlace,
  kNation,
};

bool IsOnSpine(GeoLevel level);
std::string_view LevelName(GeoLevel level);
std::optional<GeoLevel> ParseLevel(std::string_view name);

// Width of the standard GEOID code for a level. OptBlockGroup has no
// standard GEOID and returns -1.
int GeoIdWidth(GeoLevel level);

inline constexpr size_t kGeocodeLength = 31;

// A parsed 31-digit NMF block geocode. Field widths follow the NMF digit
// table: positions 1; 2-3; 4-5; 6-8; 9-12; 13-15; 16-17; 18-20; 21-26; 27;
// 28-31.
struct GeoCode {
  std::string raw;
  int aian_flag = 0;
  std::string state_fips;
  std::string spine_opt_code;
  std::string county_fips;
  std::string tract_equiv;
  std::string opt_blockgroup_equiv;
  std::string geoid_state;
  std::string geoid_county;
  std::string geoid_tract;
  std::string bg_digit;
  std::string block_fips;

  // Reassembles the 31-digit string from the fields.
  std::string ToString() const;

  // Key of the enclosing NMF spine unit at `level` (County, Tract,
  // OptBlockGroup or Block): the geocode prefix that identifies it.
  std::string SpineKey(GeoLevel level) const;

  bool operator==(const GeoCode&) const = default;
};

// Throws Error(kMalformedGeocode) on wrong length or non-digits and
// Error(kInconsistentGeocode) when the block-group digit does not repeat the
// first block digit or the AI/AN digit is not 0/1.
GeoCode ParseGeocode(std::string_view raw);

struct GeoId {
  GeoLevel level = GeoLevel::kBlock;
  std::string code;

  auto operator<=>(const GeoId&) const = default;
};

// Validates the code width for the level. Throws Error(kSchemaError).
GeoId MakeGeoId(GeoLevel level, std::string code);

// Block GEOID: digits 16-26 followed by digits 28-31 of the geocode.
GeoId ToGeoid(const GeoCode& code);

// NMF-side placement of a block, everything the standard GEOID does not
// carry.
struct SpinePlacement {
  int aian_flag = 0;
  std::string spine_opt_code = "10";
  std::string tract_equiv;           // 4 digits
  std::string opt_blockgroup_equiv;  // 3 digits
};

// Inverse of ToGeoid given the NMF placement.
GeoCode MakeGeocode(const GeoId& block, const SpinePlacement& placement);

using NodeIndex = int32_t;
using BlockIndex = int32_t;
inline constexpr NodeIndex kNoNode = -1;

struct BlockRecord {
  GeoCode geocode;
  std::string vtd;    // 6 characters, empty if unassigned
  std::string place;  // 5 characters, empty if the block is in no place
};

struct SpineNode {
  GeoLevel level = GeoLevel::kBlock;
  int aian_flag = 0;
  // Nation "US", state 2-digit FIPS, otherwise the geocode prefix.
  std::string key;
  NodeIndex parent = kNoNode;
  std::vector<NodeIndex> children;
  std::vector<BlockIndex> blocks;  // sorted
};

// NMF spine plus the standard-geography membership of every block.
// Immutable once built.
class Spine {
 public:
  // Builds both hierarchies from block records. Throws Error(kSchemaError) on
  // duplicate blocks or an empty record list.
  static Spine Build(std::vector<BlockRecord> blocks);

  const std::vector<SpineNode>& nodes() const { return nodes_; }
  const SpineNode& node(NodeIndex i) const { return nodes_[i]; }
  NodeIndex root() const { return 0; }
  size_t num_blocks() const { return blocks_.size(); }
  const BlockRecord& block(BlockIndex b) const { return blocks_[b]; }
  const std::vector<BlockRecord>& blocks() const { return blocks_; }
  NodeIndex block_node(BlockIndex b) const { return block_node_[b]; }

  // Spine levels from the root down.
  static const std::vector<GeoLevel>& SpineLevels();
  const std::vector<NodeIndex>& NodesAtLevel(GeoLevel level) const;
  std::optional<NodeIndex> FindNode(std::string_view key) const;

  // Every spine unit enclosing the block, from the block up to the root.
  std::vector<NodeIndex> Ancestors(BlockIndex b) const;

  // Standard geographies (Block, BlockGroup, Tract, County, State, VTD,
  // Place, Nation) present in the spine, sorted by code.
  std::vector<GeoId> StandardUnits(GeoLevel level) const;
  // Sorted block indices of a standard geography; empty if unknown.
  std::vector<BlockIndex> BlocksOf(const GeoId& target) const;
  // The standard unit of `level` containing the block; nullopt for blocks
  // outside every place or VTD.
  std::optional<GeoId> StandardUnitOf(BlockIndex b, GeoLevel level) const;

 private:
  std::vector<SpineNode> nodes_;
  std::vector<BlockRecord> blocks_;
  std::vector<NodeIndex> block_node_;
  std::map<GeoLevel, std::vector<NodeIndex>> by_level_;
  std::unordered_map<std::string, NodeIndex> by_key_;
  std::map<GeoLevel, std::map<std::string, std::vector<BlockIndex>>>
      standard_;
};

struct Composition {
  GeoId target;
  std::vector<NodeIndex> parts;
};

// Greedy hierarchical fill: descend the spine from the top, taking every unit
// whose blocks all lie in the still-uncovered part of the target, and finish
// with single blocks. Parts are disjoint and cover the target exactly.
// Throws Error(kEmptyTarget) when the target has no known blocks.
Composition ComposeTarget(const Spine& spine, const GeoId& target);

// Same fill for an arbitrary block set (sorted or not, no duplicates).
std::vector<NodeIndex> ComposeBlocks(const Spine& spine,
                                     std::span<const BlockIndex> blocks);

}  // namespace dasim

#endif  // DASIM_GEO_H_
