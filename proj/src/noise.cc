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

#include "dasim/noise.h"

#include <cmath>
#include <utility>

#include "dasim/discrete_gaussian.h"
#include "dasim/error.h"
#include "dasim/rng.h"

namespace dasim {

std::string_view QueryGroupName(QueryGroup group) {
  switch (group) {
    case QueryGroup::kDetail:
      return "detail";
    case QueryGroup::kTotal:
      return "total";
    case QueryGroup::kMarginal:
      return "marginal";
  }
  return "unknown";
}

BudgetSchedule BudgetSchedule::Default() {
  BudgetSchedule s;
  const std::pair<GeoLevel, double> levels[] = {
      {GeoLevel::kNation, 1.0},         {GeoLevel::kState, 4.0},
      {GeoLevel::kCounty, 16.0},        {GeoLevel::kTract, 25.0},
      {GeoLevel::kOptBlockGroup, 50.0}, {GeoLevel::kBlock, 100.0}};
  for (const auto& [level, v] : levels) s.entries_[level] = {v, v, v};
  return s;
}

BudgetSchedule BudgetSchedule::Zero() {
  BudgetSchedule s;
  for (GeoLevel level : Spine::SpineLevels()) s.entries_[level] = {0, 0, 0};
  return s;
}

void BudgetSchedule::Set(GeoLevel level, QueryGroup group, double variance) {
  if (!(variance >= 0.0) || !std::isfinite(variance)) {
    throw Error(ErrorCode::kParameterError, "query variance must be >= 0");
  }
  entries_[level][static_cast<int>(group)] = variance;
}

double BudgetSchedule::Variance(GeoLevel level, QueryGroup group) const {
  auto it = entries_.find(level);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kParameterError,
                "no budget for level " + std::string(LevelName(level)));
  }
  return it->second[static_cast<int>(group)];
}

QueryMatrix QueryMatrix::Build(const CellSchema& schema,
                               const BudgetSchedule& schedule,
                               bool include_detail, bool include_total,
                               bool include_marginals) {
  QueryMatrix q(schema, schedule);
  const int n = schema.size();
  if (include_detail) {
    Path path{"detail", {}};
    for (int c = 0; c < n; ++c) {
      path.queries.push_back(q.num_queries());
      q.queries_.push_back(
          {"detail/" + std::to_string(c), QueryGroup::kDetail, -1, {c}});
    }
    q.paths_.push_back(std::move(path));
  }
  if (include_total) {
    Query total{"total", QueryGroup::kTotal, -1, {}};
    for (int c = 0; c < n; ++c) total.cells.push_back(c);
    q.paths_.push_back({"total", {q.num_queries()}});
    q.queries_.push_back(std::move(total));
  }
  if (include_marginals) {
    for (size_t a = 0; a < schema.axes().size(); ++a) {
      const Axis& axis = schema.axes()[a];
      Path path{axis.name, {}};
      std::vector<Query> family(axis.cardinality);
      for (int v = 0; v < axis.cardinality; ++v) {
        family[v] = {axis.name + "/" + std::to_string(v), QueryGroup::kMarginal,
                     static_cast<int>(a), {}};
      }
      for (int c = 0; c < n; ++c) {
        family[schema.Coord(c, static_cast<int>(a))].cells.push_back(c);
      }
      for (Query& query : family) {
        path.queries.push_back(q.num_queries());
        q.queries_.push_back(std::move(query));
      }
      q.paths_.push_back(std::move(path));
    }
  }
  if (q.queries_.empty()) {
    throw Error(ErrorCode::kSchemaError, "query matrix has no queries");
  }
  return q;
}

std::vector<int64_t> QueryMatrix::Evaluate(const Histogram& x) const {
  if (x.size() != schema_.size()) {
    throw Error(ErrorCode::kSchemaError,
                "histogram has " + std::to_string(x.size()) +
                    " cells, queries expect " +
                    std::to_string(schema_.size()));
  }
  std::vector<int64_t> out(queries_.size(), 0);
  for (size_t j = 0; j < queries_.size(); ++j) {
    int64_t sum = 0;
    for (int32_t c : queries_[j].cells) sum += x[c];
    out[j] = sum;
  }
  return out;
}

std::vector<double> QueryMatrix::Variances(GeoLevel level) const {
  std::vector<double> out(queries_.size());
  for (size_t j = 0; j < queries_.size(); ++j) {
    out[j] = schedule_.Variance(level, queries_[j].group);
  }
  return out;
}

int QueryMatrix::Find(std::string_view id) const {
  for (size_t j = 0; j < queries_.size(); ++j) {
    if (queries_[j].id == id) return static_cast<int>(j);
  }
  return -1;
}

std::string RunLabel(uint64_t seed) { return "noise:" + std::to_string(seed); }

NoisyMeasurements MakeNoisyMeasurements(const CefDataset& cef,
                                        const QueryMatrix& queries,
                                        uint64_t seed) {
  if (!(cef.schema == queries.schema())) {
    throw Error(ErrorCode::kSchemaError,
                "CEF schema does not match the query schema");
  }
  const Spine& spine = *cef.spine;
  NoisyMeasurements out;
  out.run = RunLabel(seed);
  out.by_node.resize(spine.nodes().size());
  std::map<GeoLevel, std::vector<double>> level_variances;
  for (size_t n = 0; n < spine.nodes().size(); ++n) {
    const SpineNode& node = spine.node(static_cast<NodeIndex>(n));
    auto it = level_variances.find(node.level);
    if (it == level_variances.end()) {
      it = level_variances.emplace(node.level, queries.Variances(node.level))
               .first;
    }
    NoisyMeasurementSet& m = out.by_node[n];
    m.values = queries.Evaluate(cef.node_histograms[n]);
    m.variances = it->second;
    Rng rng = MakeStream(seed, node.key);
    for (size_t j = 0; j < m.values.size(); ++j) {
      m.values[j] += SampleDiscreteGaussian(m.variances[j], rng);
    }
  }
  return out;
}

Measured CombineEstimates(std::span<const Measured> estimates) {
  if (estimates.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no estimates to combine");
  }
  double weight_sum = 0.0;
  double weighted = 0.0;
  for (const Measured& e : estimates) {
    if (!(e.variance > 0.0)) {
      throw Error(ErrorCode::kParameterError,
                  "inverse-variance weighting needs positive variances");
    }
    weight_sum += 1.0 / e.variance;
    weighted += e.value / e.variance;
  }
  return Measured{weighted / weight_sum, 1.0 / weight_sum};
}

NmEstimator::NmEstimator(const QueryMatrix& queries,
                         const AggregationMatrix& stats)
    : stats_(stats) {
  if (stats.num_cells() != queries.schema().size()) {
    throw Error(ErrorCode::kSchemaError,
                "statistics and queries disagree on the cell count");
  }
  derivations_.resize(stats.num_rows());
  for (int s = 0; s < stats.num_rows(); ++s) {
    const auto& w = stats.row(s).weights;
    for (const QueryMatrix::Path& path : queries.paths()) {
      std::vector<Term> terms;
      bool derivable = true;
      for (int j : path.queries) {
        const auto& cells = queries.queries()[j].cells;
        const int32_t coefficient = w[cells.front()];
        for (int32_t c : cells) {
          if (w[c] != coefficient) {
            derivable = false;
            break;
          }
        }
        if (!derivable) break;
        if (coefficient != 0) terms.push_back({j, double(coefficient)});
      }
      if (derivable && !terms.empty()) {
        derivations_[s].push_back(std::move(terms));
      }
    }
    if (derivations_[s].empty()) {
      throw Error(ErrorCode::kCoverageError,
                  "statistic '" + stats.row(s).label +
                      "' cannot be derived from the query set");
    }
  }
}

std::vector<Measured> NmEstimator::Estimate(
    const NoisyMeasurementSet& m) const {
  std::vector<Measured> out(derivations_.size());
  std::vector<Measured> paths;
  for (size_t s = 0; s < derivations_.size(); ++s) {
    paths.clear();
    bool exact = false;
    for (const auto& terms : derivations_[s]) {
      Measured e;
      for (const Term& t : terms) {
        e.value += t.coefficient * static_cast<double>(m.values[t.query]);
        e.variance += t.coefficient * t.coefficient * m.variances[t.query];
      }
      if (e.variance == 0.0) {
        // A noiseless path is the exact answer.
        out[s] = e;
        exact = true;
        break;
      }
      paths.push_back(e);
    }
    if (!exact) out[s] = CombineEstimates(paths);
  }
  return out;
}

std::vector<std::vector<Measured>> NmEstimator::EstimateAll(
    const NoisyMeasurements& nms) const {
  std::vector<std::vector<Measured>> out;
  out.reserve(nms.by_node.size());
  for (const NoisyMeasurementSet& m : nms.by_node) out.push_back(Estimate(m));
  return out;
}

std::vector<Measured> NmEstimator::Compose(
    const std::vector<std::vector<Measured>>& node_estimates,
    std::span<const NodeIndex> parts) const {
  std::vector<Measured> out(derivations_.size());
  for (NodeIndex part : parts) {
    const auto& e = node_estimates.at(part);
    for (size_t s = 0; s < out.size(); ++s) {
      out[s].value += e[s].value;
      out[s].variance += e[s].variance;
    }
  }
  return out;
}

std::vector<StatEstimate> NmStatistics(const NoisyMeasurements& nms,
                                       const QueryMatrix& queries,
                                       const AggregationMatrix& stats,
                                       const Spine& spine,
                                       const GeoId& target) {
  const Composition comp = ComposeTarget(spine, target);
  const NmEstimator estimator(queries, stats);
  std::vector<Measured> sum(stats.num_rows());
  for (NodeIndex part : comp.parts) {
    if (static_cast<size_t>(part) >= nms.by_node.size()) {
      throw Error(ErrorCode::kCoverageError,
                  "no noisy measurements for spine unit " +
                      spine.node(part).key);
    }
    const std::vector<Measured> e = estimator.Estimate(nms.by_node[part]);
    for (size_t s = 0; s < sum.size(); ++s) {
      sum[s].value += e[s].value;
      sum[s].variance += e[s].variance;
    }
  }
  std::vector<StatEstimate> out;
  for (int s = 0; s < stats.num_rows(); ++s) {
    out.push_back(StatEstimate{target.code, stats.row(s).label, sum[s].value,
                               sum[s].variance});
  }
  return out;
}

}  // namespace dasim
