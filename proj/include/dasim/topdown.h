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

#ifndef DASIM_TOPDOWN_H_
#define DASIM_TOPDOWN_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dasim/geo.h"
#include "dasim/histogram.h"
#include "dasim/noise.h"

namespace dasim {

// A statistic held exactly to the CEF at `level` and, by summation, at every
// coarser spine level.
struct Invariant {
  GeoLevel level = GeoLevel::kState;
  std::string statistic;

  bool operator==(const Invariant&) const = default;
};

struct PostProcessConfig {
  std::vector<Invariant> invariants = {{GeoLevel::kState, "total"}};
  bool nonneg = true;
  bool integerize = true;
};

// Post-processed counts X^td for every spine unit. Integer-valued when the
// config integerizes.
struct PostProcessedDataset {
  std::string run;
  std::vector<std::vector<double>> node_counts;
};

// Simplified TopDown: the root is fitted to its own measurements, then each
// generation of children is fitted jointly by weighted least squares
// (weights 1/variance per query) subject to summing to the fixed parent,
// non-negativity and the invariants, followed by controlled rounding that
// keeps parent sums and invariants exact. Ties in rounding go to the lower
// child (or cell) index.
//
// Invariant statistics are looked up in `stats`; their cell supports must be
// pairwise nested or disjoint. Throws Error(kCoverageError) if measurements
// are missing for some unit, Error(kSchemaError) for unusable invariants and
// Error(kInfeasibleConstraints) when invariant totals cannot be met.
PostProcessedDataset TopDownPostprocess(const NoisyMeasurements& nms,
                                        const CefDataset& cef,
                                        const QueryMatrix& queries,
                                        const AggregationMatrix& stats,
                                        const PostProcessConfig& config);

struct TopDownRun {
  NoisyMeasurements nms;
  PostProcessedDataset td;
};

// Two runs on the same CEF with independent noise. Throws Error(kSeedError)
// if the seeds are equal.
std::pair<TopDownRun, TopDownRun> RunTwice(const CefDataset& cef,
                                           const QueryMatrix& queries,
                                           const AggregationMatrix& stats,
                                           const PostProcessConfig& config,
                                           uint64_t seed1, uint64_t seed2);

namespace internal {

// Euclidean projection of v onto {y >= 0, sum y = total} (or onto the
// hyperplane alone when nonneg is false), in place.
void ProjectSimplex(std::span<double> v, double total, bool nonneg);

// Rounds v to integers summing to `total`, moving the fewest units from the
// floors: the largest fractional parts round up, ties to the lower index.
std::vector<int64_t> LargestRemainder(std::span<const double> v,
                                      int64_t total);

// Rounds a rows x cols matrix (row-major) to integers with the given row and
// column sums, rounding up the largest fractional parts first.
std::vector<int64_t> ControlledRound(std::span<const double> x, int rows,
                                     int cols,
                                     std::span<const int64_t> row_sums,
                                     std::span<const int64_t> col_sums);

// One sibling group (or the root when `parent` is empty).
struct GroupProblem {
  const QueryMatrix* queries = nullptr;
  std::vector<const NoisyMeasurementSet*> children;
  std::vector<double> parent;  // empty for the root
  // Cell lists with fixed per-child sums: atom_totals[child][atom].
  std::vector<std::vector<int32_t>> atoms;
  std::vector<std::vector<double>> atom_totals;
  bool nonneg = true;
};

// Continuous weighted least-squares solution, children x cells row-major.
std::vector<double> FitGroup(const GroupProblem& problem);

// Integer local search on a rounded table: repeatedly applies the most
// improving unit transfer of a free cell between children, or exchange of
// two cells of one atom (or two free cells) between two children, until none
// lowers the objective. At the root, free cells move by one unit and atom
// cells exchange within the single table. Every constraint is preserved.
void PolishGroup(const GroupProblem& problem, std::vector<double>& x);

// Value of the least-squares objective for a children x cells table.
double GroupObjective(const GroupProblem& problem, std::span<const double> x);

}  // namespace internal

}  // namespace dasim

#endif  // DASIM_TOPDOWN_H_
