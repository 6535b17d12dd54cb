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

#include "dasim/estimators.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include <gtest/gtest.h>

#include "dasim/error.h"
#include "dasim/noise.h"
#include "dasim/rng.h"
#include "dasim/topdown.h"
#include "test_util.h"

namespace dasim {
namespace {

struct Data {
  GeoSelection sel{GeoLevel::kBlock, {}, "total"};
  Column td{"a", "total", {}}, tdt{"b", "total", {}}, truth{"t", "total", {}};
  MeasuredColumn nm{"a", "total", {}};
};

Data Constant(int n, double td, double tdt, double nm, double var) {
  Data d;
  for (int i = 0; i < n; ++i) {
    const std::string id = "u" + std::to_string(i);
    d.sel.ids.push_back(id);
    d.td.values[id] = td;
    d.tdt.values[id] = tdt;
    d.truth.values[id] = 0;
    d.nm.values[id] = {nm, var};
  }
  return d;
}

Data Random(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-10, 10), v(0.5, 9);
  Data d;
  for (int i = 0; i < n; ++i) {
    const std::string id = "g" + std::to_string(i);
    d.sel.ids.push_back(id);
    d.td.values[id] = u(rng);
    d.tdt.values[id] = u(rng);
    d.truth.values[id] = u(rng);
    d.nm.values[id] = {u(rng), v(rng)};
  }
  return d;
}

TEST(BiasSingleTest, Examples) {
  Data d = Constant(10, 5, 5, 5, 1);
  EXPECT_EQ(EstimateBiasSingle(d.td, d.nm, d.sel), 0);
  d = Constant(10, 7, 0, 5, 1);
  EXPECT_DOUBLE_EQ(EstimateBiasSingle(d.td, d.nm, d.sel), 2);
}

TEST(BiasSingleTest, MissingGeography) {
  Data d = Constant(3, 1, 1, 1, 1);
  d.sel.ids.push_back("missing");
  try {
    EstimateBiasSingle(d.td, d.nm, d.sel);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCoverageError);
  }
}

TEST(SelectionTest, Validation) {
  GeoSelection sel{GeoLevel::kBlock, {}, "total"};
  EXPECT_THROW(ValidateSelection(sel), Error);
  sel.ids = {"a", "a"};
  EXPECT_THROW(ValidateSelection(sel), Error);
  sel.ids = {"a", "b"};
  EXPECT_NO_THROW(ValidateSelection(sel));
}

TEST(BiasIndepTest, Examples) {
  Data d = Constant(10, 3, 3, 1, 1);
  const BiasEstimate b = EstimateBiasIndep(d.tdt, d.nm, d.td, d.sel);
  EXPECT_DOUBLE_EQ(b.variance, 0.1);
  EXPECT_DOUBLE_EQ(b.value, 2);
  EXPECT_DOUBLE_EQ(b.ci_lo, 2 - 1.96 * std::sqrt(0.1));
  EXPECT_DOUBLE_EQ(b.ci_hi, 2 + 1.96 * std::sqrt(0.1));
  EXPECT_EQ(b.method, BiasMethod::kTopdownIndep);
  Data e = Constant(10, 8, 4, 4, 3);
  EXPECT_EQ(EstimateBiasIndep(e.tdt, e.nm, e.td, e.sel).value, 0);
}

TEST(BiasIndepTest, SameRunRejected) {
  Data d = Constant(3, 1, 1, 1, 1);
  d.tdt.run = d.nm.run;
  try {
    EstimateBiasIndep(d.tdt, d.nm, d.td, d.sel);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUsageError);
  }
}

TEST(BiasIndepProperty, MatchesFormula) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const Data d = Random(rng, 1 + rng() % 20);
    const double n = static_cast<double>(d.sel.ids.size());
    double diff = 0, gap = 0, sig = 0;
    for (const auto& id : d.sel.ids) {
      diff += d.tdt.values.at(id) - d.nm.values.at(id).value;
      gap += d.td.values.at(id) - d.tdt.values.at(id);
      sig += d.nm.values.at(id).variance;
    }
    const BiasEstimate b = EstimateBiasIndep(d.tdt, d.nm, d.td, d.sel);
    EXPECT_NEAR(b.value, diff / n, 1e-9);
    EXPECT_NEAR(b.variance, gap * gap / (2 * n * n) + sig / (n * n), 1e-9);
    EXPECT_NEAR(b.ci_hi - b.value, 1.96 * std::sqrt(b.variance), 1e-9);
  }
}

TEST(BiasSwapTest, Examples) {
  Data d = Constant(4, 6, 0, 6, 2);
  BiasEstimate b = EstimateBiasSwap(d.td, d.nm, d.sel);
  EXPECT_EQ(b.value, 0);
  EXPECT_EQ(b.variance, 0);
  d = Constant(1, 5, 0, 2, 2);
  b = EstimateBiasSwap(d.td, d.nm, d.sel);
  EXPECT_DOUBLE_EQ(b.value, 3);
  EXPECT_DOUBLE_EQ(b.variance, 9);
}

TEST(BiasSwapProperty, MatchesFormula) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const Data d = Random(rng, 1 + rng() % 20);
    const double n = static_cast<double>(d.sel.ids.size());
    double diff = 0, sq = 0;
    for (const auto& id : d.sel.ids) {
      const double e = d.td.values.at(id) - d.nm.values.at(id).value;
      diff += e;
      sq += e * e;
    }
    const BiasEstimate b = EstimateBiasSwap(d.td, d.nm, d.sel);
    EXPECT_NEAR(b.value, diff / n, 1e-9);
    EXPECT_NEAR(b.variance, sq / (n * n), 1e-9);
  }
}

TEST(BiasTotalTest, AverageOfRuns) {
  Data d = Constant(4, 3, 1, 0, 1);
  const BiasEstimate b = EstimateBiasTotal(d.td, d.tdt, d.truth, d.sel);
  EXPECT_DOUBLE_EQ(b.value, 2);
  EXPECT_DOUBLE_EQ(std::sqrt(b.variance), 1);
  EXPECT_EQ(b.method, BiasMethod::kTopdownTotal);
}

TEST(MseTest, Examples) {
  Data d = Constant(5, 0, 4, 4, 3);
  MseEstimate m = EstimateMse(d.tdt, d.nm, d.sel, MseMethod::kTopdown);
  EXPECT_DOUBLE_EQ(m.raw, -3);
  EXPECT_EQ(m.clamped, 0);
  EXPECT_EQ(m.rmse, 0);
  // sigma^2 = 0 and the source is truth + c.
  d = Constant(5, 0, 7, 4, 0);
  m = EstimateMse(d.tdt, d.nm, d.sel, MseMethod::kSwapping);
  EXPECT_DOUBLE_EQ(m.raw, 9);
  EXPECT_DOUBLE_EQ(m.rmse, 3);
}

TEST(MseTest, Misuse) {
  Data d = Constant(2, 0, 1, 1, 1);
  d.tdt.run = d.nm.run;
  EXPECT_THROW(EstimateMse(d.tdt, d.nm, d.sel, MseMethod::kTopdown), Error);
  EXPECT_THROW(EstimateMse(d.td, d.nm, d.sel, MseMethod::kNmfExact), Error);
}

TEST(MseProperty, ClampingMonotone) {
  double previous = 0;
  for (double raw = -5; raw <= 5; raw += 0.25) {
    const MseEstimate m = MakeMseEstimate(raw, MseMethod::kTopdown, 3);
    EXPECT_EQ(m.clamped, std::max(raw, 0.0));
    EXPECT_EQ(m.rmse == 0, raw <= 0);
    EXPECT_GE(m.rmse, previous);
    previous = m.rmse;
  }
}

TEST(NmfRmseTest, Examples) {
  Data d = Constant(4, 0, 0, 1, 4);
  EXPECT_DOUBLE_EQ(NmfRmseExact(d.nm, d.sel).rmse, 2);
  d = Constant(2, 0, 0, 1, 1);
  d.nm.values["u1"].variance = 9;
  const MseEstimate m = NmfRmseExact(d.nm, d.sel);
  EXPECT_DOUBLE_EQ(m.raw, 5);
  EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(5.0));
  EXPECT_EQ(m.method, MseMethod::kNmfExact);
}

TEST(NmfRmseTest, ComposedTargetsScaleWithRootK) {
  const CefDataset cef = testing::SyntheticCef(SpineSpec{}, 3);
  const QueryMatrix q =
      QueryMatrix::Build(cef.schema, BudgetSchedule::Default());
  const AggregationMatrix stats = AggregationMatrix::Default(cef.schema);
  const NmEstimator est(q, stats);
  const auto all = est.EstimateAll(MakeNoisyMeasurements(cef, q, 1));
  const auto& blocks = cef.spine->NodesAtLevel(GeoLevel::kBlock);
  MeasuredColumn one{"r", "total", {}}, many{"r", "total", {}};
  GeoSelection sel{GeoLevel::kBlock, {"x"}, "total"};
  const int k = 4;
  one.values["x"] = all[blocks[0]][0];
  const std::vector<NodeIndex> parts(blocks.begin(), blocks.begin() + k);
  many.values["x"] = est.Compose(all, parts)[0];
  EXPECT_NEAR(NmfRmseExact(many, sel).rmse / NmfRmseExact(one, sel).rmse,
              std::sqrt(static_cast<double>(k)), 1e-9);
}

TEST(DecileBinsTest, Examples) {
  std::vector<int64_t> pops(10);
  std::iota(pops.begin(), pops.end(), 1);
  const auto bins = DecileBins(pops);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(bins[i], i);
  const auto same = DecileBins(std::vector<int64_t>(30, 4));
  EXPECT_TRUE(std::all_of(same.begin(), same.end(), [](int b) { return b == 0; }));
  try {
    DecileBins(std::vector<int64_t>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

// Oracle: sort, slice into k equal runs by rank, then move each tie group to
// the lowest slice any of its members fell into.
std::vector<int> SliceOracle(const std::vector<int64_t>& pops, int k) {
  const size_t n = pops.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return pops[a] < pops[b]; });
  std::vector<int> slice(n);
  for (size_t r = 0; r < n; ++r) slice[order[r]] = static_cast<int>(r * k / n);
  std::map<int64_t, int> lowest;
  for (size_t i = 0; i < n; ++i) {
    auto [it, fresh] = lowest.emplace(pops[i], slice[i]);
    if (!fresh) it->second = std::min(it->second, slice[i]);
  }
  std::vector<int> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = lowest[pops[i]];
  return out;
}

TEST(DecileBinsProperty, SkewedMatchesOracle) {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> skew(3.0, 1.2);
  for (int t = 0; t < 100; ++t) {
    std::vector<int64_t> pops(1 + rng() % 300);
    for (auto& p : pops) p = static_cast<int64_t>(skew(rng));
    const int k = 1 + rng() % 12;
    EXPECT_EQ(DecileBins(pops, k), SliceOracle(pops, k));
  }
}

TEST(DecileBinsTest, MapOverload) {
  const std::map<std::string, int64_t> pops = {{"a", 5}, {"b", 1}, {"c", 9}};
  const auto bins = DecileBins(pops, 3);
  EXPECT_EQ(bins.at("b"), 0);
  EXPECT_EQ(bins.at("a"), 1);
  EXPECT_EQ(bins.at("c"), 2);
}

TEST(CorrelationTest, Examples) {
  const std::vector<double> a = {1, 4, 2, 8, 5};
  std::vector<double> neg(a.size());
  std::transform(a.begin(), a.end(), neg.begin(), [](double x) { return -x; });
  EXPECT_NEAR(*Correlation(a, a), 1.0, 1e-12);
  EXPECT_NEAR(*Correlation(a, neg), -1.0, 1e-12);
  const std::vector<double> flat(5, 3.0);
  EXPECT_FALSE(Correlation(a, flat).has_value());
}

TEST(CorrelationTest, IndependentNoise) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> a(10000), b(10000);
  for (auto& x : a) x = z(rng);
  for (auto& x : b) x = z(rng);
  EXPECT_LT(std::abs(*Correlation(a, b)), 0.05);
}

TEST(ShareBinsTest, Layout) {
  EXPECT_EQ(NumShareBins(), 27);
  EXPECT_EQ(ShareBinIndex(-0.03), 0);
  EXPECT_EQ(ShareBinIndex(1.2), 26);
  EXPECT_EQ(ShareBinIndex(0.0), 1);
  EXPECT_EQ(ShareBinIndex(1.0), 25);
  EXPECT_EQ(ShareBinIndex(0.04), 2);
}

TEST(ShareBinsTest, SingleOccupiedBin) {
  const std::vector<double> errors(20, -2.0), shares(20, 0.5);
  const auto bins = BinnedBiasByShare(errors, shares);
  ASSERT_EQ(bins.size(), 27u);
  int occupied = 0;
  for (const ShareBin& b : bins) {
    if (b.n == 0) {
      EXPECT_FALSE(b.mean.has_value());
      continue;
    }
    ++occupied;
    EXPECT_DOUBLE_EQ(*b.mean, -2.0);
    EXPECT_DOUBLE_EQ(*b.se, 0.0);
  }
  EXPECT_EQ(occupied, 1);
}

TEST(ShareBinsTest, TracksKnownCurve) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> noise(0, 3);
  auto f = [](double s) { return 10 * s * s - 4 * s; };
  std::vector<double> errors, shares;
  for (int i = 0; i < 20000; ++i) {
    shares.push_back(u(rng));
    errors.push_back(f(shares.back()) + noise(rng));
  }
  const auto bins = BinnedBiasByShare(errors, shares);
  int close = 0, used = 0;
  for (const ShareBin& b : bins) {
    if (b.n < 2) continue;
    ++used;
    // Mean of f over the bin.
    double avg = 0;
    for (int j = 0; j < 100; ++j) avg += f(b.lo + (b.hi - b.lo) * (j + 0.5) / 100);
    avg /= 100;
    close += std::abs(*b.mean - avg) <= 2 * *b.se;
  }
  EXPECT_EQ(used, 25);
  EXPECT_GE(close, static_cast<int>(std::ceil(0.95 * used)) - 1);
}

TEST(ReportTest, CsvAndJson) {
  ErrorReport r;
  r.rows.push_back(ToReportRow(MakeBiasEstimate(1.5, 0.25, BiasMethod::kSwapping, 4),
                               "block", "total", std::nullopt));
  r.rows.push_back(ToReportRow(MakeMseEstimate(-2, MseMethod::kTopdown, 4),
                               "tract", "white", 3));
  std::ostringstream csv;
  r.WriteCsv(csv);
  const std::string text = csv.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "level,statistic,bin,method,estimate,variance,ci_lo,ci_hi,raw_mse,"
            "rmse,n");
  EXPECT_NE(text.find("block,total,all,bias_swapping,1.5,0.25"), std::string::npos);
  EXPECT_NE(text.find("tract,white,3,mse_topdown,0,,,,-2,0,4"), std::string::npos);
  const auto j = nlohmann::json::parse(r.ToJson());
  EXPECT_EQ(j.at("rows").size(), 2u);
}

// Replicate oracle on a small world: unbiasedness of both TopDown bias
// estimators, the variance identity and the MSE estimator.
TEST(EstimatorMonteCarlo, TopDownReplicates) {
  SpineSpec spec;
  spec.counties_per_state = 1;
  spec.tracts_per_county = 2;
  spec.block_groups_per_tract = 2;
  spec.blocks_per_block_group = 3;
  const CefDataset cef = testing::SyntheticCef(spec, 12);
  const QueryMatrix q =
      QueryMatrix::Build(cef.schema, BudgetSchedule::Default());
  const AggregationMatrix stats = AggregationMatrix::Default(cef.schema);
  const NmEstimator est(q, stats);
  const auto& blocks = cef.spine->NodesAtLevel(GeoLevel::kBlock);
  const int R = 1000;
  GeoSelection sel{GeoLevel::kBlock, {}, "total"};
  for (NodeIndex b : blocks) sel.ids.push_back(cef.spine->node(b).key);
  std::vector<double> single, indep, values, vhat, raw, mse, gap_sq;
  std::vector<double> sum_err;
  for (int r = 0; r < R; ++r) {
    const auto [a, b] =
        RunTwice(cef, q, stats, PostProcessConfig{},
                 StreamSeed(12, std::to_string(r) + ":1"),
                 StreamSeed(12, std::to_string(r) + ":2"));
    Column td{"1", "total", {}}, tdt{"2", "total", {}};
    MeasuredColumn nm{"1", "total", {}};
    double e2 = 0, sq = 0, s1 = 0, half = 0, half_gap = 0;
    for (size_t i = 0; i < blocks.size(); ++i) {
      const NodeIndex n = blocks[i];
      const std::string& id = cef.spine->node(n).key;
      const double y = static_cast<double>(cef.at(n).Total());
      const auto& x1 = a.td.node_counts[n];
      const auto& x2 = b.td.node_counts[n];
      td.values[id] = std::accumulate(x1.begin(), x1.end(), 0.0);
      tdt.values[id] = std::accumulate(x2.begin(), x2.end(), 0.0);
      nm.values[id] = est.Estimate(a.nms.by_node[n])[0];
      e2 += tdt.values[id] - y;
      sq += (tdt.values[id] - y) * (tdt.values[id] - y);
      s1 += td.values[id] - y;
      if (i < blocks.size() / 2) {
        half += td.values[id] - y;
        half_gap += td.values[id] - tdt.values[id];
      }
    }
    sum_err.push_back(half);
    gap_sq.push_back(0.5 * half_gap * half_gap);
    const double n = static_cast<double>(blocks.size());
    single.push_back(EstimateBiasSingle(td, nm, sel) - s1 / n);
    const BiasEstimate bi = EstimateBiasIndep(tdt, nm, td, sel);
    indep.push_back(bi.value - e2 / n);
    values.push_back(bi.value);
    vhat.push_back(bi.variance);
    raw.push_back(EstimateMse(tdt, nm, sel, MseMethod::kTopdown).raw);
    mse.push_back(sq / n);
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  auto var = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  EXPECT_LE(std::abs(mean(single)), 4 * std::sqrt(var(single) / R));
  EXPECT_LE(std::abs(mean(indep)), 4 * std::sqrt(var(indep) / R));
  EXPECT_NEAR(mean(vhat) / var(values), 1.0, 0.10);
  EXPECT_NEAR(mean(raw) / mean(mse), 1.0, 0.10);
  // Half the squared run gap over a block subset against the replicate
  // variance of the summed errors (variances plus cross covariances).
  const double var_sum = var(sum_err);
  EXPECT_GT(var_sum, 0);
  EXPECT_NEAR(mean(gap_sq) / var_sum, 1.0, 0.15);
}

}  // namespace
}  // namespace dasim
