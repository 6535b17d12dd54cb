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
#include <bit>
#include <set>
#include <utility>

#include "dasim/error.h"

namespace dasim {

namespace {

constexpr const char* kRaceNames63[] = {"white", "black", "aian",
                                        "asian", "nhpi",  "other"};
constexpr const char* kRaceNames6[] = {"white", "black", "aian",
                                       "asian", "other", "two_or_more"};

}  // namespace

CellSchema::CellSchema(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) {
    throw Error(ErrorCode::kSchemaError, "cell schema needs an axis");
  }
  std::set<std::string> names;
  for (const Axis& axis : axes_) {
    if (axis.cardinality < 1) {
      throw Error(ErrorCode::kSchemaError,
                  "axis '" + axis.name + "' has cardinality < 1");
    }
    if (!names.insert(axis.name).second) {
      throw Error(ErrorCode::kSchemaError,
                  "duplicate axis '" + axis.name + "'");
    }
  }
  strides_.assign(axes_.size(), 1);
  for (size_t i = axes_.size(); i-- > 0;) {
    strides_[i] = size_;
    size_ *= axes_[i].cardinality;
  }
}

CellSchema CellSchema::Desk() {
  return CellSchema(
      {{"voting_age", 2}, {"hispanic", 2}, {"race", 6}, {"housing", 2}});
}

CellSchema CellSchema::Full() {
  return CellSchema(
      {{"voting_age", 2}, {"hispanic", 2}, {"race", 63}, {"housing", 8}});
}

std::optional<int> CellSchema::AxisIndex(std::string_view name) const {
  for (size_t i = 0; i < axes_.size(); ++i) {
    if (axes_[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

int CellSchema::Index(std::span<const int> coords) const {
  if (coords.size() != axes_.size()) {
    throw Error(ErrorCode::kSchemaError, "coordinate rank mismatch");
  }
  int index = 0;
  for (size_t i = 0; i < axes_.size(); ++i) {
    if (coords[i] < 0 || coords[i] >= axes_[i].cardinality) {
      throw Error(ErrorCode::kSchemaError,
                  "coordinate out of range on axis '" + axes_[i].name + "'");
    }
    index += coords[i] * strides_[i];
  }
  return index;
}

std::vector<int> CellSchema::Coords(int index) const {
  std::vector<int> out(axes_.size());
  for (size_t i = 0; i < axes_.size(); ++i) out[i] = Coord(index, i);
  return out;
}

int CellSchema::Coord(int cell, int axis) const {
  return (cell / strides_[axis]) % axes_[axis].cardinality;
}

Histogram::Histogram(std::vector<int64_t> counts) : counts_(std::move(counts)) {
  for (int64_t c : counts_) {
    if (c < 0) throw Error(ErrorCode::kSchemaError, "negative count");
  }
}

int64_t Histogram::Total() const {
  int64_t total = 0;
  for (int64_t c : counts_) total += c;
  return total;
}

Histogram& Histogram::operator+=(const Histogram& other) {
  if (other.size() != size()) {
    throw Error(ErrorCode::kSchemaError, "histogram size mismatch");
  }
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

AggregationMatrix::AggregationMatrix(const CellSchema& schema,
                                     std::vector<Row> rows)
    : rows_(std::move(rows)), num_cells_(schema.size()) {
  if (rows_.empty()) {
    throw Error(ErrorCode::kSchemaError, "aggregation matrix has no rows");
  }
  std::set<std::string> labels;
  for (const Row& row : rows_) {
    if (static_cast<int>(row.weights.size()) != num_cells_) {
      throw Error(ErrorCode::kSchemaError,
                  "row '" + row.label + "' has the wrong width");
    }
    if (std::all_of(row.weights.begin(), row.weights.end(),
                    [](int32_t w) { return w == 0; })) {
      throw Error(ErrorCode::kSchemaError,
                  "row '" + row.label + "' is all zero");
    }
    if (!labels.insert(row.label).second) {
      throw Error(ErrorCode::kSchemaError,
                  "duplicate statistic '" + row.label + "'");
    }
  }
}

AggregationMatrix AggregationMatrix::Default(const CellSchema& schema) {
  const int n = schema.size();
  std::vector<Row> rows;
  auto add = [&](std::string label, auto&& predicate) {
    Row row{std::move(label), std::vector<int32_t>(n, 0)};
    for (int c = 0; c < n; ++c) row.weights[c] = predicate(c) ? 1 : 0;
    if (std::any_of(row.weights.begin(), row.weights.end(),
                    [](int32_t w) { return w != 0; })) {
      rows.push_back(std::move(row));
    }
  };

  add("total", [](int) { return true; });
  if (auto axis = schema.AxisIndex("voting_age")) {
    add("voting_age", [&](int c) { return schema.Coord(c, *axis) == 1; });
  }
  if (auto axis = schema.AxisIndex("hispanic")) {
    add("hispanic", [&](int c) { return schema.Coord(c, *axis) == 1; });
  }
  if (auto axis = schema.AxisIndex("race")) {
    const int card = schema.axes()[*axis].cardinality;
    auto race = [&](int c) { return schema.Coord(c, *axis); };
    if (card == 63) {
      for (int bit = 0; bit < 6; ++bit) {
        add(kRaceNames63[bit],
            [&](int c) { return race(c) + 1 == (1 << bit); });
      }
      add("two_or_more",
          [&](int c) { return std::popcount(unsigned(race(c) + 1)) >= 2; });
    } else {
      for (int r = 0; r < card; ++r) {
        std::string name =
            card == 6 ? kRaceNames6[r] : "race_" + std::to_string(r);
        add(std::move(name), [&](int c) { return race(c) == r; });
      }
    }
    // White alone is race index 0 in both encodings.
    add("non_white", [&](int c) { return race(c) != 0; });
  }
  return AggregationMatrix(schema, std::move(rows));
}

std::optional<int> AggregationMatrix::Find(std::string_view label) const {
  for (size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].label == label) return static_cast<int>(i);
  }
  return std::nullopt;
}

int AggregationMatrix::IndexOf(std::string_view label) const {
  auto i = Find(label);
  if (!i) {
    throw Error(ErrorCode::kSchemaError,
                "unknown statistic '" + std::string(label) + "'");
  }
  return *i;
}

std::vector<std::string> AggregationMatrix::labels() const {
  std::vector<std::string> out;
  for (const Row& row : rows_) out.push_back(row.label);
  return out;
}

std::vector<int64_t> AggregationMatrix::Apply(const Histogram& h) const {
  if (h.size() != num_cells_) {
    throw Error(ErrorCode::kSchemaError,
                "histogram has " + std::to_string(h.size()) +
                    " cells, aggregation expects " +
                    std::to_string(num_cells_));
  }
  std::vector<int64_t> out(rows_.size(), 0);
  for (size_t r = 0; r < rows_.size(); ++r) {
    const auto& w = rows_[r].weights;
    int64_t sum = 0;
    for (int c = 0; c < num_cells_; ++c) sum += w[c] * h[c];
    out[r] = sum;
  }
  return out;
}

std::vector<double> AggregationMatrix::Apply(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != num_cells_) {
    throw Error(ErrorCode::kSchemaError, "cell vector size mismatch");
  }
  std::vector<double> out(rows_.size(), 0.0);
  for (size_t r = 0; r < rows_.size(); ++r) {
    const auto& w = rows_[r].weights;
    double sum = 0.0;
    for (int c = 0; c < num_cells_; ++c) sum += w[c] * x[c];
    out[r] = sum;
  }
  return out;
}

std::vector<int64_t> Aggregate(const Histogram& h,
                               const AggregationMatrix& a) {
  return a.Apply(h);
}

std::vector<Histogram> BlockHistograms(const HouseholdFile& file,
                                       size_t num_blocks,
                                       const CellSchema& schema) {
  std::vector<Histogram> out(num_blocks, Histogram(schema.size()));
  for (const Household& h : file.households) {
    if (h.block < 0 || static_cast<size_t>(h.block) >= num_blocks) {
      throw Error(ErrorCode::kSchemaError, "household block out of range");
    }
    for (const auto& [cell, count] : h.composition) {
      if (cell < 0 || cell >= schema.size()) {
        throw Error(ErrorCode::kSchemaError, "household cell out of range");
      }
      out[h.block][cell] += count;
    }
  }
  return out;
}

Histogram CefDataset::BlockSum(std::span<const BlockIndex> blocks) const {
  Histogram sum(schema.size());
  for (BlockIndex b : blocks) sum += node_histograms[spine->block_node(b)];
  return sum;
}

std::vector<Histogram> RollUp(const Spine& spine,
                              std::vector<Histogram> block_histograms) {
  if (block_histograms.size() != spine.num_blocks()) {
    throw Error(ErrorCode::kSchemaError, "one histogram per block required");
  }
  const int cells = block_histograms.front().size();
  std::vector<Histogram> nodes(spine.nodes().size(), Histogram(cells));
  for (size_t b = 0; b < block_histograms.size(); ++b) {
    nodes[spine.block_node(static_cast<BlockIndex>(b))] =
        std::move(block_histograms[b]);
  }
  // Nodes are created parent-first, so a reverse sweep sees children first.
  for (size_t n = nodes.size(); n-- > 1;) {
    const NodeIndex parent = spine.node(static_cast<NodeIndex>(n)).parent;
    nodes[parent] += nodes[n];
  }
  return nodes;
}

CefDataset MakeCefDataset(std::shared_ptr<const Spine> spine,
                          const CellSchema& schema,
                          std::vector<Histogram> block_histograms,
                          HouseholdFile households) {
  for (const Histogram& h : block_histograms) {
    if (h.size() != schema.size()) {
      throw Error(ErrorCode::kSchemaError, "block histogram width mismatch");
    }
  }
  CefDataset cef;
  cef.node_histograms = RollUp(*spine, std::move(block_histograms));
  cef.spine = std::move(spine);
  cef.schema = schema;
  cef.households = std::move(households);
  return cef;
}

bool IsHierarchicallyConsistent(const Spine& spine,
                                std::span<const Histogram> node_histograms) {
  for (size_t n = 0; n < spine.nodes().size(); ++n) {
    const SpineNode& node = spine.node(static_cast<NodeIndex>(n));
    if (node.children.empty()) continue;
    Histogram sum(node_histograms[n].size());
    for (NodeIndex c : node.children) sum += node_histograms[c];
    if (!(sum == node_histograms[n])) return false;
  }
  return true;
}

}  // namespace dasim
