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

#ifndef DASIM_NOISE_H_
#define DASIM_NOISE_H_

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dasim/geo.h"
#include "dasim/histogram.h"

namespace dasim {

enum class QueryGroup { kDetail, kTotal, kMarginal };

std::string_view QueryGroupName(QueryGroup group);

// Per-level query variances (the privacy-loss budget schedule), one value per
// query group.
class BudgetSchedule {
 public:
  // nation 1, state 4, county 16, tract 25, opt_block_group 50, block 100
  // for every group.
  static BudgetSchedule Default();
  static BudgetSchedule Zero();

  void Set(GeoLevel level, QueryGroup group, double variance);
  // Throws Error(kParameterError) for levels without an entry.
  double Variance(GeoLevel level, QueryGroup group) const;
  const std::map<GeoLevel, std::array<double, 3>>& entries() const {
    return entries_;
  }

 private:
  std::map<GeoLevel, std::array<double, 3>> entries_;
};

struct Query {
  std::string id;
  QueryGroup group = QueryGroup::kDetail;
  int axis = -1;                // marginal queries only
  std::vector<int32_t> cells;  // sorted
};

// The query workload Q applied at every spine unit, grouped into
// aggregation paths: the detail queries, the total query, and one marginal
// family per axis. Queries inside a path partition the cells.
class QueryMatrix {
 public:
  struct Path {
    std::string name;
    std::vector<int> queries;
  };

  static QueryMatrix Build(const CellSchema& schema,
                           const BudgetSchedule& schedule,
                           bool include_detail = true,
                           bool include_total = true,
                           bool include_marginals = true);

  const CellSchema& schema() const { return schema_; }
  const BudgetSchedule& schedule() const { return schedule_; }
  const std::vector<Query>& queries() const { return queries_; }
  const std::vector<Path>& paths() const { return paths_; }
  int num_queries() const { return static_cast<int>(queries_.size()); }

  // Q x. Throws Error(kSchemaError) on a size mismatch.
  std::vector<int64_t> Evaluate(const Histogram& x) const;
  std::vector<double> Variances(GeoLevel level) const;
  // Index of a query id, or -1.
  int Find(std::string_view id) const;

 private:
  QueryMatrix(CellSchema schema, BudgetSchedule schedule)
      : schema_(std::move(schema)), schedule_(std::move(schedule)) {}

  CellSchema schema_;
  BudgetSchedule schedule_;
  std::vector<Query> queries_;
  std::vector<Path> paths_;
};

struct NoisyMeasurementSet {
  std::vector<int64_t> values;
  std::vector<double> variances;
};

// M = Q x + eta for every spine unit, eta independent across units and
// queries. `run` names the noise draw so estimators can enforce
// independence requirements.
struct NoisyMeasurements {
  std::string run;
  std::vector<NoisyMeasurementSet> by_node;
};

// Deterministic per (seed, unit, query): each unit draws from its own stream
// keyed by the unit's spine key.
NoisyMeasurements MakeNoisyMeasurements(const CefDataset& cef,
                                        const QueryMatrix& queries,
                                        uint64_t seed);

std::string RunLabel(uint64_t seed);

struct Measured {
  double value = 0.0;
  double variance = 0.0;
};

// Inverse-variance weighted mean. Throws Error(kEmptyInput) for no input and
// Error(kParameterError) for a non-positive variance.
Measured CombineEstimates(std::span<const Measured> estimates);

struct StatEstimate {
  std::string geography;
  std::string statistic;
  double value = 0.0;
  double variance = 0.0;
};

// The B(Sigma) map: for each statistic, the query subsets of every path that
// sum to it, combined across paths by inverse variance. Construction throws
// Error(kCoverageError) if some statistic has no path.
class NmEstimator {
 public:
  NmEstimator(const QueryMatrix& queries, const AggregationMatrix& stats);

  const AggregationMatrix& stats() const { return stats_; }

  // One Measured per statistic for a single spine unit.
  std::vector<Measured> Estimate(const NoisyMeasurementSet& m) const;
  // Per-statistic estimates for every spine unit.
  std::vector<std::vector<Measured>> EstimateAll(
      const NoisyMeasurements& nms) const;
  // Sum over composition parts; variances add.
  std::vector<Measured> Compose(
      const std::vector<std::vector<Measured>>& node_estimates,
      std::span<const NodeIndex> parts) const;

 private:
  AggregationMatrix stats_;
  struct Term {
    int query;
    double coefficient;
  };
  // derivations_[s]: one term list per path that yields statistic s.
  std::vector<std::vector<std::vector<Term>>> derivations_;
};

// Composes the target from spine units and returns one estimate per
// statistic. Throws Error(kEmptyTarget) or Error(kCoverageError).
std::vector<StatEstimate> NmStatistics(const NoisyMeasurements& nms,
                                       const QueryMatrix& queries,
                                       const AggregationMatrix& stats,
                                       const Spine& spine,
                                       const GeoId& target);

}  // namespace dasim

#endif  // DASIM_NOISE_H_
