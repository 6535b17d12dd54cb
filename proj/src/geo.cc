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

#include "dasim/geo.h"

#include <algorithm>
#include <cctype>
#include <set>
#include <utility>

#include "dasim/error.h"

namespace dasim {

namespace {

constexpr std::pair<GeoLevel, std::string_view> kLevelNames[] = {
    {GeoLevel::kBlock, "block"},
    {GeoLevel::kOptBlockGroup, "opt_block_group"},
    {GeoLevel::kBlockGroup, "block_group"},
    {GeoLevel::kTract, "tract"},
    {GeoLevel::kCounty, "county"},
    {GeoLevel::kState, "state"},
    {GeoLevel::kVtd, "vtd"},
    {GeoLevel::kPlace, "place"},
    {GeoLevel::kNation, "nation"},
};

bool AllDigits(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool AllAlnum(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isalnum(c) != 0; });
}

// Geocode prefix lengths identifying each NMF spine unit.
size_t SpinePrefixLength(GeoLevel level) {
  switch (level) {
    case GeoLevel::kCounty:
      return 8;
    case GeoLevel::kTract:
      return 12;
    case GeoLevel::kOptBlockGroup:
      return 15;
    case GeoLevel::kBlock:
      return kGeocodeLength;
    default:
      throw Error(ErrorCode::kSchemaError,
                  "no geocode prefix for level " +
                      std::string(LevelName(level)));
  }
}

}  // namespace

bool IsOnSpine(GeoLevel level) {
  switch (level) {
    case GeoLevel::kBlock:
    case GeoLevel::kOptBlockGroup:
    case GeoLevel::kTract:
    case GeoLevel::kCounty:
    case GeoLevel::kState:
    case GeoLevel::kNation:
      return true;
    default:
      return false;
  }
}

std::string_view LevelName(GeoLevel level) {
  for (const auto& [l, name] : kLevelNames) {
    if (l == level) return name;
  }
  return "unknown";
}

std::optional<GeoLevel> ParseLevel(std::string_view name) {
  for (const auto& [l, n] : kLevelNames) {
    if (n == name) return l;
  }
  return std::nullopt;
}

int GeoIdWidth(GeoLevel level) {
  switch (level) {
    case GeoLevel::kBlock:
      return 15;
    case GeoLevel::kBlockGroup:
      return 12;
    case GeoLevel::kTract:
      return 11;
    case GeoLevel::kCounty:
      return 5;
    case GeoLevel::kState:
      return 2;
    case GeoLevel::kVtd:
      return 11;
    case GeoLevel::kPlace:
      return 7;
    case GeoLevel::kNation:
      return 2;
    case GeoLevel::kOptBlockGroup:
      return -1;
  }
  return -1;
}

std::string GeoCode::ToString() const {
  std::string out;
  out.reserve(kGeocodeLength);
  out += static_cast<char>('0' + aian_flag);
  out += state_fips;
  out += spine_opt_code;
  out += county_fips;
  out += tract_equiv;
  out += opt_blockgroup_equiv;
  out += geoid_state;
  out += geoid_county;
  out += geoid_tract;
  out += bg_digit;
  out += block_fips;
  return out;
}

std::string GeoCode::SpineKey(GeoLevel level) const {
  return ToString().substr(0, SpinePrefixLength(level));
}

GeoCode ParseGeocode(std::string_view raw) {
  if (raw.size() != kGeocodeLength) {
    throw Error(ErrorCode::kMalformedGeocode,
                "expected 31 digits, got " + std::to_string(raw.size()) +
                    " characters");
  }
  if (!AllDigits(raw)) {
    throw Error(ErrorCode::kMalformedGeocode,
                "non-digit character in '" + std::string(raw) + "'");
  }
  GeoCode g;
  g.raw = std::string(raw);
  auto field = [&](size_t first, size_t last) {
    // 1-based inclusive positions.
    return std::string(raw.substr(first - 1, last - first + 1));
  };
  if (raw[0] != '0' && raw[0] != '1') {
    throw Error(ErrorCode::kInconsistentGeocode,
                "AI/AN digit must be 0 or 1 in '" + g.raw + "'");
  }
  g.aian_flag = raw[0] - '0';
  g.state_fips = field(2, 3);
  g.spine_opt_code = field(4, 5);
  g.county_fips = field(6, 8);
  g.tract_equiv = field(9, 12);
  g.opt_blockgroup_equiv = field(13, 15);
  g.geoid_state = field(16, 17);
  g.geoid_county = field(18, 20);
  g.geoid_tract = field(21, 26);
  g.bg_digit = field(27, 27);
  g.block_fips = field(28, 31);
  if (g.bg_digit[0] != g.block_fips[0]) {
    throw Error(ErrorCode::kInconsistentGeocode,
                "block-group digit " + g.bg_digit +
                    " does not repeat block FIPS " + g.block_fips + " in '" +
                    g.raw + "'");
  }
  return g;
}

GeoId MakeGeoId(GeoLevel level, std::string code) {
  const int width = GeoIdWidth(level);
  if (width < 0) {
    throw Error(ErrorCode::kSchemaError,
                "level " + std::string(LevelName(level)) +
                    " has no standard GEOID");
  }
  if (static_cast<int>(code.size()) != width) {
    throw Error(ErrorCode::kSchemaError,
                std::string(LevelName(level)) + " GEOID must have " +
                    std::to_string(width) + " characters, got '" + code + "'");
  }
  const bool ok = level == GeoLevel::kNation ? code == "US"
                  : level == GeoLevel::kVtd  ? AllAlnum(code)
                                             : AllDigits(code);
  if (!ok) {
    throw Error(ErrorCode::kSchemaError, "invalid " +
                                             std::string(LevelName(level)) +
                                             " GEOID '" + code + "'");
  }
  return GeoId{level, std::move(code)};
}

GeoId ToGeoid(const GeoCode& code) {
  return GeoId{GeoLevel::kBlock, code.geoid_state + code.geoid_county +
                                     code.geoid_tract + code.block_fips};
}

GeoCode MakeGeocode(const GeoId& block, const SpinePlacement& placement) {
  if (block.level != GeoLevel::kBlock || block.code.size() != 15) {
    throw Error(ErrorCode::kSchemaError, "MakeGeocode needs a block GEOID");
  }
  GeoCode g;
  g.aian_flag = placement.aian_flag;
  g.geoid_state = block.code.substr(0, 2);
  g.geoid_county = block.code.substr(2, 3);
  g.geoid_tract = block.code.substr(5, 6);
  g.block_fips = block.code.substr(11, 4);
  g.bg_digit = g.block_fips.substr(0, 1);
  g.state_fips = g.geoid_state;
  g.county_fips = g.geoid_county;
  g.spine_opt_code = placement.spine_opt_code;
  g.tract_equiv = placement.tract_equiv;
  g.opt_blockgroup_equiv = placement.opt_blockgroup_equiv;
  g.raw = g.ToString();
  return ParseGeocode(g.raw);
}

// ---------------------------------------------------------------------------
// Spine

const std::vector<GeoLevel>& Spine::SpineLevels() {
  static const std::vector<GeoLevel> kLevels = {
      GeoLevel::kNation, GeoLevel::kState,         GeoLevel::kCounty,
      GeoLevel::kTract,  GeoLevel::kOptBlockGroup, GeoLevel::kBlock};
  return kLevels;
}

Spine Spine::Build(std::vector<BlockRecord> blocks) {
  if (blocks.empty()) {
    throw Error(ErrorCode::kSchemaError, "spine needs at least one block");
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const BlockRecord& a, const BlockRecord& b) {
              return a.geocode.raw < b.geocode.raw;
            });
  Spine spine;
  spine.blocks_ = std::move(blocks);

  std::set<std::string> seen_geoids;
  for (const BlockRecord& rec : spine.blocks_) {
    if (!seen_geoids.insert(ToGeoid(rec.geocode).code).second) {
      throw Error(ErrorCode::kSchemaError,
                  "duplicate block " + ToGeoid(rec.geocode).code);
    }
  }

  auto add_node = [&spine](GeoLevel level, int aian, std::string key,
                           NodeIndex parent) {
    auto it = spine.by_key_.find(key);
    if (it != spine.by_key_.end()) return it->second;
    const auto index = static_cast<NodeIndex>(spine.nodes_.size());
    SpineNode node;
    node.level = level;
    node.aian_flag = aian;
    node.key = key;
    node.parent = parent;
    spine.nodes_.push_back(std::move(node));
    if (parent != kNoNode) spine.nodes_[parent].children.push_back(index);
    spine.by_key_.emplace(std::move(key), index);
    spine.by_level_[level].push_back(index);
    return index;
  };

  add_node(GeoLevel::kNation, 0, "US", kNoNode);
  spine.block_node_.resize(spine.blocks_.size());
  for (size_t b = 0; b < spine.blocks_.size(); ++b) {
    const GeoCode& g = spine.blocks_[b].geocode;
    if (g.state_fips != g.geoid_state || g.county_fips != g.geoid_county) {
      throw Error(ErrorCode::kInconsistentGeocode,
                  "spine and GEOID state/county disagree in '" + g.raw + "'");
    }
    NodeIndex parent = 0;
    parent = add_node(GeoLevel::kState, 0, g.state_fips, parent);
    for (GeoLevel level : {GeoLevel::kCounty, GeoLevel::kTract,
                           GeoLevel::kOptBlockGroup, GeoLevel::kBlock}) {
      parent = add_node(level, g.aian_flag, g.SpineKey(level), parent);
    }
    spine.block_node_[b] = parent;
    for (NodeIndex n = parent; n != kNoNode; n = spine.nodes_[n].parent) {
      spine.nodes_[n].blocks.push_back(static_cast<BlockIndex>(b));
    }

    const auto bi = static_cast<BlockIndex>(b);
    const GeoId geoid = ToGeoid(g);
    const std::string& c = geoid.code;
    auto& std_units = spine.standard_;
    std_units[GeoLevel::kBlock][c].push_back(bi);
    std_units[GeoLevel::kBlockGroup][c.substr(0, 12)].push_back(bi);
    std_units[GeoLevel::kTract][c.substr(0, 11)].push_back(bi);
    std_units[GeoLevel::kCounty][c.substr(0, 5)].push_back(bi);
    std_units[GeoLevel::kState][c.substr(0, 2)].push_back(bi);
    std_units[GeoLevel::kNation]["US"].push_back(bi);
    const BlockRecord& rec = spine.blocks_[b];
    if (!rec.vtd.empty()) {
      std_units[GeoLevel::kVtd][c.substr(0, 5) + rec.vtd].push_back(bi);
    }
    if (!rec.place.empty()) {
      std_units[GeoLevel::kPlace][c.substr(0, 2) + rec.place].push_back(bi);
    }
  }
  return spine;
}

const std::vector<NodeIndex>& Spine::NodesAtLevel(GeoLevel level) const {
  static const std::vector<NodeIndex> kEmpty;
  auto it = by_level_.find(level);
  return it == by_level_.end() ? kEmpty : it->second;
}

std::optional<NodeIndex> Spine::FindNode(std::string_view key) const {
  auto it = by_key_.find(std::string(key));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeIndex> Spine::Ancestors(BlockIndex b) const {
  std::vector<NodeIndex> out;
  for (NodeIndex n = block_node_[b]; n != kNoNode; n = nodes_[n].parent) {
    out.push_back(n);
  }
  return out;
}

std::vector<GeoId> Spine::StandardUnits(GeoLevel level) const {
  std::vector<GeoId> out;
  auto it = standard_.find(level);
  if (it == standard_.end()) return out;
  out.reserve(it->second.size());
  for (const auto& [code, unused] : it->second) {
    out.push_back(GeoId{level, code});
  }
  return out;
}

std::vector<BlockIndex> Spine::BlocksOf(const GeoId& target) const {
  if (target.level == GeoLevel::kOptBlockGroup) {
    // Optimized block groups have no GEOID; accept the spine key.
    auto node = FindNode(target.code);
    if (!node || nodes_[*node].level != GeoLevel::kOptBlockGroup) return {};
    return nodes_[*node].blocks;
  }
  auto level_it = standard_.find(target.level);
  if (level_it == standard_.end()) return {};
  auto it = level_it->second.find(target.code);
  if (it == level_it->second.end()) return {};
  return it->second;
}

std::optional<GeoId> Spine::StandardUnitOf(BlockIndex b,
                                           GeoLevel level) const {
  const BlockRecord& rec = blocks_[b];
  const std::string c = ToGeoid(rec.geocode).code;
  switch (level) {
    case GeoLevel::kBlock:
      return GeoId{level, c};
    case GeoLevel::kBlockGroup:
      return GeoId{level, c.substr(0, 12)};
    case GeoLevel::kTract:
      return GeoId{level, c.substr(0, 11)};
    case GeoLevel::kCounty:
      return GeoId{level, c.substr(0, 5)};
    case GeoLevel::kState:
      return GeoId{level, c.substr(0, 2)};
    case GeoLevel::kNation:
      return GeoId{level, "US"};
    case GeoLevel::kVtd:
      if (rec.vtd.empty()) return std::nullopt;
      return GeoId{level, c.substr(0, 5) + rec.vtd};
    case GeoLevel::kPlace:
      if (rec.place.empty()) return std::nullopt;
      return GeoId{level, c.substr(0, 2) + rec.place};
    case GeoLevel::kOptBlockGroup:
      return GeoId{level, rec.geocode.SpineKey(GeoLevel::kOptBlockGroup)};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Composition

std::vector<NodeIndex> ComposeBlocks(const Spine& spine,
                                     std::span<const BlockIndex> blocks) {
  std::vector<char> uncovered(spine.num_blocks(), 0);
  for (BlockIndex b : blocks) uncovered[b] = 1;

  std::vector<NodeIndex> parts;
  for (GeoLevel level : Spine::SpineLevels()) {
    // Candidates: the level-`level` ancestors of still-uncovered blocks.
    std::vector<NodeIndex> candidates;
    for (BlockIndex b : blocks) {
      if (!uncovered[b]) continue;
      for (NodeIndex n : spine.Ancestors(b)) {
        if (spine.node(n).level == level) {
          candidates.push_back(n);
          break;
        }
      }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
    for (NodeIndex n : candidates) {
      const auto& node_blocks = spine.node(n).blocks;
      const bool contained =
          std::all_of(node_blocks.begin(), node_blocks.end(),
                      [&](BlockIndex b) { return uncovered[b] != 0; });
      if (!contained) continue;
      parts.push_back(n);
      for (BlockIndex b : node_blocks) uncovered[b] = 0;
    }
  }
  return parts;
}

Composition ComposeTarget(const Spine& spine, const GeoId& target) {
  const std::vector<BlockIndex> blocks = spine.BlocksOf(target);
  if (blocks.empty()) {
    throw Error(ErrorCode::kEmptyTarget,
                std::string(LevelName(target.level)) + " '" + target.code +
                    "' has no known blocks");
  }
  return Composition{target, ComposeBlocks(spine, blocks)};
}

}  // namespace dasim
