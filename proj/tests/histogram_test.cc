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

#include "dasim/histogram.h"

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "dasim/error.h"
#include "dasim/synthetic.h"
#include "test_util.h"

namespace dasim {
namespace {

TEST(CellSchemaTest, Sizes) {
  EXPECT_EQ(CellSchema::Desk().size(), 48);
  EXPECT_EQ(CellSchema::Full().size(), 2016);
  const CellSchema s({{"a", 2}, {"b", 3}, {"c", 4}});
  for (int i = 0; i < s.size(); ++i) EXPECT_EQ(s.Index(s.Coords(i)), i);
  EXPECT_THROW(CellSchema({}), Error);
  EXPECT_THROW(CellSchema({{"a", 0}}), Error);
  EXPECT_THROW(CellSchema({{"a", 2}, {"a", 2}}), Error);
}

TEST(AggregateTest, ZeroAndSingle) {
  const CellSchema schema = CellSchema::Desk();
  const AggregationMatrix a = AggregationMatrix::Default(schema);
  for (int64_t v : a.Apply(Histogram(schema.size()))) EXPECT_EQ(v, 0);
  Histogram one(schema.size());
  one[17] = 1;
  EXPECT_EQ(a.Apply(one)[a.IndexOf("total")], 1);
}

TEST(AggregateTest, EightCellHandSum) {
  // voting_age x hispanic x race(2): white = race 0.
  const CellSchema schema({{"voting_age", 2}, {"hispanic", 2}, {"race", 2}});
  const AggregationMatrix a(
      schema, {{"total", {1, 1, 1, 1, 1, 1, 1, 1}},
               {"adult_hispanic", {0, 0, 0, 0, 0, 0, 1, 1}},
               {"white", {1, 0, 1, 0, 1, 0, 1, 0}}});
  const Histogram h(std::vector<int64_t>{3, 1, 4, 1, 5, 9, 2, 6});
  int64_t total = 0, adult_hisp = 0, white = 0;
  for (int c = 0; c < 8; ++c) {
    const auto k = schema.Coords(c);
    total += h[c];
    if (k[0] == 1 && k[1] == 1) adult_hisp += h[c];
    if (k[2] == 0) white += h[c];
  }
  EXPECT_EQ(a.Apply(h), (std::vector<int64_t>{total, adult_hisp, white}));
  EXPECT_EQ(total, 31);
  EXPECT_EQ(adult_hisp, 8);
  EXPECT_EQ(white, 14);
}

TEST(AggregateTest, DimensionMismatch) {
  const AggregationMatrix a = AggregationMatrix::Default(CellSchema::Desk());
  try {
    a.Apply(Histogram(7));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
  }
  EXPECT_THROW(AggregationMatrix(CellSchema::Desk(), {}), Error);
}

TEST(AggregateTest, DefaultLabels) {
  const auto labels = AggregationMatrix::Default(CellSchema::Desk()).labels();
  for (const char* l : {"total", "voting_age", "hispanic", "white", "black",
                        "aian", "asian", "other", "two_or_more", "non_white"}) {
    EXPECT_NE(std::find(labels.begin(), labels.end(), l), labels.end()) << l;
  }
}

TEST(AggregateProperty, Linear) {
  const CellSchema schema = CellSchema::Desk();
  const AggregationMatrix a = AggregationMatrix::Default(schema);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int64_t> u(schema.size()), v(schema.size());
    for (auto& x : u) x = rng() % 50;
    for (auto& x : v) x = rng() % 50;
    const Histogram h1(u), h2(v);
    const auto lhs = a.Apply(h1 + h2);
    const auto r1 = a.Apply(h1), r2 = a.Apply(h2);
    for (size_t s = 0; s < lhs.size(); ++s) EXPECT_EQ(lhs[s], r1[s] + r2[s]);
  }
}

TEST(SyntheticCefTest, ConsistentAndDeterministic) {
  const SpineSpec spec;
  const CefDataset a = testing::SyntheticCef(spec, 9);
  const CefDataset b = testing::SyntheticCef(spec, 9);
  EXPECT_EQ(a.node_histograms, b.node_histograms);
  EXPECT_EQ(a.households.households, b.households.households);
  EXPECT_TRUE(IsHierarchicallyConsistent(*a.spine, a.node_histograms));
  for (const SpineNode& node : a.spine->nodes()) {
    if (node.children.empty()) continue;
    Histogram sum(a.schema.size());
    for (NodeIndex c : node.children) sum += a.at(c);
    EXPECT_EQ(sum, a.at(&node - a.spine->nodes().data()));
  }
  // Households reproduce the block histograms.
  const auto blocks =
      BlockHistograms(a.households, a.spine->num_blocks(), a.schema);
  for (size_t b = 0; b < blocks.size(); ++b) {
    EXPECT_EQ(blocks[b], a.at(a.spine->block_node(static_cast<BlockIndex>(b))));
  }
  const CefDataset other = testing::SyntheticCef(spec, 10);
  EXPECT_NE(a.node_histograms, other.node_histograms);
}

TEST(SyntheticCefTest, NoEmptyBlocksWhenDisabled) {
  SyntheticProfile profile;
  profile.zero_block_probability = 0.0;
  const auto spine = testing::SyntheticSpine(SpineSpec{}, 1);
  const CefDataset cef =
      GenerateSyntheticCef(spine, CellSchema::Desk(), profile, 2);
  for (NodeIndex b : spine->NodesAtLevel(GeoLevel::kBlock)) {
    EXPECT_GT(cef.at(b).Total(), 0);
  }
}

TEST(SyntheticCefTest, MedianBlockPopulation) {
  SpineSpec spec;
  spec.counties_per_state = 10;
  spec.tracts_per_county = 10;
  spec.block_groups_per_tract = 5;
  spec.blocks_per_block_group = 20;
  const auto spine = testing::SyntheticSpine(spec, 4);
  ASSERT_EQ(spine->num_blocks(), 10000u);
  const CefDataset cef = GenerateSyntheticCef(spine, CellSchema::Desk(),
                                              SyntheticProfile{}, 5);
  std::vector<int64_t> pops;
  for (NodeIndex b : spine->NodesAtLevel(GeoLevel::kBlock)) {
    pops.push_back(cef.at(b).Total());
  }
  std::nth_element(pops.begin(), pops.begin() + pops.size() / 2, pops.end());
  const int64_t median = pops[pops.size() / 2];
  EXPECT_GE(median, 15);
  EXPECT_LE(median, 35);
}

TEST(SyntheticCefTest, FullSchemaWorks) {
  const CefDataset cef =
      testing::SyntheticCef(testing::SmallSpec(), 2, CellSchema::Full());
  EXPECT_EQ(cef.at(0).size(), 2016);
  const AggregationMatrix a = AggregationMatrix::Default(cef.schema);
  const auto y = a.Apply(cef.at(0));
  EXPECT_EQ(y[a.IndexOf("total")], cef.at(0).Total());
}

}  // namespace
}  // namespace dasim
