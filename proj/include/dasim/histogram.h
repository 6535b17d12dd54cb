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

#ifndef DASIM_HISTOGRAM_H_
#define DASIM_HISTOGRAM_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dasim/geo.h"

namespace dasim {

struct Axis {
  std::string name;
  int cardinality = 1;

  bool operator==(const Axis&) const = default;
};

// Ordered cell axes. Cell index is row-major with the first axis slowest.
class CellSchema {
 public:
  // Throws Error(kSchemaError) on an empty axis list, a cardinality below 1
  // or duplicate axis names.
  explicit CellSchema(std::vector<Axis> axes);

  // voting_age 2 x hispanic 2 x race 6 x housing 2 = 48 cells.
  static CellSchema Desk();
  // voting_age 2 x hispanic 2 x race 63 x housing 8 = 2016 cells.
  static CellSchema Full();

  const std::vector<Axis>& axes() const { return axes_; }
  int size() const { return size_; }
  std::optional<int> AxisIndex(std::string_view name) const;

  int Index(std::span<const int> coords) const;
  std::vector<int> Coords(int index) const;
  // Coordinate of `cell` along axis `axis`.
  int Coord(int cell, int axis) const;

  bool operator==(const CellSchema& other) const {
    return axes_ == other.axes_;
  }

 private:
  std::vector<Axis> axes_;
  std::vector<int> strides_;
  int size_ = 1;
};

class Histogram {
 public:
  Histogram() = default;
  explicit Histogram(int size) : counts_(size, 0) {}
  explicit Histogram(std::vector<int64_t> counts);

  int size() const { return static_cast<int>(counts_.size()); }
  int64_t operator[](int i) const { return counts_[i]; }
  int64_t& operator[](int i) { return counts_[i]; }
  std::span<const int64_t> counts() const { return counts_; }
  int64_t Total() const;

  Histogram& operator+=(const Histogram& other);
  friend Histogram operator+(Histogram a, const Histogram& b) {
    a += b;
    return a;
  }
  bool operator==(const Histogram&) const = default;

 private:
  std::vector<int64_t> counts_;
};

// Published statistics as 0/1 rows over cells (y* = A x).
class AggregationMatrix {
 public:
  struct Row {
    std::string label;
    std::vector<int32_t> weights;
  };

  // Throws Error(kSchemaError) on zero rows, wrong width or duplicate labels.
  AggregationMatrix(const CellSchema& schema, std::vector<Row> rows);

  // total, voting_age, hispanic, one row per race category, non_white.
  // Race categories use alone definitions; with 63 race combinations the
  // race index r encodes the set bits of r + 1 over (white, black, aian,
  // asian, nhpi, other) and two_or_more collects multi-bit codes.
  static AggregationMatrix Default(const CellSchema& schema);

  int num_rows() const { return static_cast<int>(rows_.size()); }
  int num_cells() const { return num_cells_; }
  const std::vector<Row>& rows() const { return rows_; }
  const Row& row(int i) const { return rows_[i]; }
  std::optional<int> Find(std::string_view label) const;
  // Like Find but throws Error(kSchemaError).
  int IndexOf(std::string_view label) const;
  std::vector<std::string> labels() const;

  // Throws Error(kSchemaError) on dimension mismatch.
  std::vector<int64_t> Apply(const Histogram& h) const;
  std::vector<double> Apply(std::span<const double> x) const;

 private:
  std::vector<Row> rows_;
  int num_cells_ = 0;
};

std::vector<int64_t> Aggregate(const Histogram& h, const AggregationMatrix& a);

struct Household {
  BlockIndex block = 0;
  int size = 1;
  int adults = 1;
  // (cell, count) pairs sorted by cell; counts sum to size.
  std::vector<std::pair<int32_t, int32_t>> composition;

  bool operator==(const Household&) const = default;
};

struct HouseholdFile {
  std::vector<Household> households;
};

// Sums household compositions per block. Throws Error(kSchemaError) on cells
// outside the schema.
std::vector<Histogram> BlockHistograms(const HouseholdFile& file,
                                       size_t num_blocks,
                                       const CellSchema& schema);

// Ground-truth histograms for every spine node, leaves from block data and
// parents by summation.
struct CefDataset {
  std::shared_ptr<const Spine> spine;
  CellSchema schema = CellSchema::Desk();
  std::vector<Histogram> node_histograms;
  HouseholdFile households;

  const Histogram& at(NodeIndex n) const { return node_histograms[n]; }
  // Sum over a block set (a standard geography).
  Histogram BlockSum(std::span<const BlockIndex> blocks) const;
};

// Builds parents by summation from per-block histograms.
CefDataset MakeCefDataset(std::shared_ptr<const Spine> spine,
                          const CellSchema& schema,
                          std::vector<Histogram> block_histograms,
                          HouseholdFile households = {});

// Node histograms for an arbitrary block-level assignment (used for swapped
// and post-processed data).
std::vector<Histogram> RollUp(const Spine& spine,
                              std::vector<Histogram> block_histograms);

// True when every parent equals the sum of its children.
bool IsHierarchicallyConsistent(const Spine& spine,
                                std::span<const Histogram> node_histograms);

}  // namespace dasim

#endif  // DASIM_HISTOGRAM_H_
