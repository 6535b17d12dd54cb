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
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "dasim/discrete_gaussian.h"
#include "dasim/error.h"
#include "dasim/rng.h"
#include "test_util.h"

namespace dasim {
namespace {

// Mean and variance of the discrete Gaussian by direct summation.
std::pair<double, double> AnalyticMoments(double variance) {
  double z = 0, m1 = 0, m2 = 0;
  for (int k = -200; k <= 200; ++k) {
    const double p = std::exp(-k * k / (2.0 * variance));
    z += p;
    m1 += k * p;
    m2 += k * k * p;
  }
  return {m1 / z, m2 / z - (m1 / z) * (m1 / z)};
}

TEST(DiscreteGaussianTest, ZeroVariance) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(SampleDiscreteGaussian(0.0, rng), 0);
}

TEST(DiscreteGaussianTest, NegativeVarianceRejected) {
  Rng rng(1);
  try {
    SampleDiscreteGaussian(-1.0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParameterError);
  }
}

TEST(DiscreteGaussianTest, MomentsAtVarianceFour) {
  const auto [mean, var] = AnalyticMoments(4.0);
  Rng rng = MakeStream(17, "moments");
  const int n = 1'000'000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(SampleDiscreteGaussian(4.0, rng));
    s1 += x;
    s2 += x * x;
  }
  const double m = s1 / n;
  const double v = (s2 - n * m * m) / (n - 1);
  EXPECT_NEAR(m, mean, 0.01);
  EXPECT_NEAR(v, var, 0.05);
  EXPECT_NEAR(var, 4.0, 1e-6);
}

TEST(DiscreteGaussianTest, ZeroToOneRatio) {
  Rng rng = MakeStream(18, "ratio");
  int64_t zeros = 0, ones = 0;
  for (int i = 0; i < 1'000'000; ++i) {
    const int64_t x = SampleDiscreteGaussian(1.0, rng);
    zeros += x == 0;
    ones += x == 1;
  }
  const double ratio = static_cast<double>(zeros) / static_cast<double>(ones);
  EXPECT_NEAR(ratio / std::exp(0.5), 1.0, 0.02);
}

TEST(DiscreteGaussianTest, LaplaceIsSymmetric) {
  Rng rng(5);
  double s = 0;
  for (int i = 0; i < 100000; ++i) s += SampleDiscreteLaplace(2.0, rng);
  EXPECT_NEAR(s / 100000, 0.0, 0.05);
}

TEST(CombineEstimatesTest, Examples) {
  const std::vector<Measured> equal = {{10, 4}, {14, 4}};
  const Measured a = CombineEstimates(equal);
  EXPECT_DOUBLE_EQ(a.value, 12);
  EXPECT_DOUBLE_EQ(a.variance, 2);
  const std::vector<Measured> one = {{0, 1}};
  const Measured b = CombineEstimates(one);
  EXPECT_DOUBLE_EQ(b.value, 0);
  EXPECT_DOUBLE_EQ(b.variance, 1);
  const std::vector<Measured> mixed = {{10, 1}, {20, 4}};
  const Measured c = CombineEstimates(mixed);
  // (10/1 + 20/4) / (1 + 1/4) = 15 / 1.25 = 12; 1 / 1.25 = 0.8.
  EXPECT_NEAR(c.value, 12.0, 1e-12);
  EXPECT_NEAR(c.variance, 0.8, 1e-12);
}

TEST(CombineEstimatesTest, Errors) {
  try {
    CombineEstimates({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
  const std::vector<Measured> bad = {{1, 0.0}, {2, 1.0}};
  try {
    CombineEstimates(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParameterError);
  }
}

TEST(CombineEstimatesProperty, VarianceBelowMinimum) {
  Rng rng(9);
  std::uniform_real_distribution<double> var(0.1, 50), val(-100, 100);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Measured> in(1 + rng() % 6);
    for (auto& m : in) m = {val(rng), var(rng)};
    const Measured out = CombineEstimates(in);
    double min_var = 1e300, lo = 1e300, hi = -1e300;
    for (const auto& m : in) {
      min_var = std::min(min_var, m.variance);
      lo = std::min(lo, m.value);
      hi = std::max(hi, m.value);
    }
    EXPECT_LE(out.variance, min_var * (1 + 1e-12));
    EXPECT_GE(out.value, lo - 1e-9);
    EXPECT_LE(out.value, hi + 1e-9);
  }
}

// Four-cell schema with a total query and the cell detail, both at variance 9
// on the tract level.
struct TractFixture {
  CellSchema schema{{{"c", 4}}};
  QueryMatrix queries = [&] {
    BudgetSchedule b = BudgetSchedule::Zero();
    b.Set(GeoLevel::kTract, QueryGroup::kDetail, 9.0);
    b.Set(GeoLevel::kTract, QueryGroup::kTotal, 9.0);
    return QueryMatrix::Build(schema, b, true, true, false);
  }();
  AggregationMatrix stats{schema, {{"total", {1, 1, 1, 1}}}};
};

TEST(NmEstimatorTest, TractCombinedVariance) {
  TractFixture f;
  const NmEstimator est(f.queries, f.stats);
  const auto v = f.queries.Variances(GeoLevel::kTract);
  NoisyMeasurementSet m{std::vector<int64_t>(v.size(), 0), v};
  const std::vector<Measured> out = est.Estimate(m);
  EXPECT_NEAR(out[0].variance, 1.0 / (1.0 / 9 + 1.0 / 36), 1e-12);
  EXPECT_NEAR(out[0].variance, 7.2, 1e-12);
}

TEST(NmEstimatorTest, TractCombinedVarianceMonteCarlo) {
  TractFixture f;
  const NmEstimator est(f.queries, f.stats);
  const auto v = f.queries.Variances(GeoLevel::kTract);
  const std::vector<int64_t> truth = {3, 0, 5, 2};
  const int64_t total = 10;
  Rng rng = MakeStream(4, "tract");
  const int R = 40000;
  double s1 = 0, s2 = 0;
  for (int r = 0; r < R; ++r) {
    NoisyMeasurementSet m;
    m.variances = v;
    for (int q = 0; q < f.queries.num_queries(); ++q) {
      const Query& query = f.queries.queries()[q];
      int64_t answer = 0;
      for (int c : query.cells) answer += truth[c];
      m.values.push_back(answer + SampleDiscreteGaussian(v[q], rng));
    }
    const double e = est.Estimate(m)[0].value - total;
    s1 += e;
    s2 += e * e;
  }
  const double var = s2 / R - (s1 / R) * (s1 / R);
  EXPECT_NEAR(var / 7.2, 1.0, 0.05);
}

TEST(NmEstimatorTest, UnderivableStatistic) {
  const CellSchema schema({{"c", 4}});
  const QueryMatrix q =
      QueryMatrix::Build(schema, BudgetSchedule::Default(), false, true, false);
  const AggregationMatrix stats(schema, {{"first", {1, 0, 0, 0}}});
  try {
    NmEstimator est(q, stats);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCoverageError);
  }
}

TEST(NoisyMeasurementsTest, ZeroBudgetIsExact) {
  const CefDataset cef = testing::SyntheticCef(testing::SmallSpec(), 1);
  const QueryMatrix q =
      QueryMatrix::Build(cef.schema, BudgetSchedule::Zero());
  const NoisyMeasurements nms = MakeNoisyMeasurements(cef, q, 5);
  for (size_t n = 0; n < cef.node_histograms.size(); ++n) {
    EXPECT_EQ(nms.by_node[n].values, q.Evaluate(cef.node_histograms[n]));
  }
  const AggregationMatrix stats = AggregationMatrix::Default(cef.schema);
  const NmEstimator est(q, stats);
  for (size_t n = 0; n < cef.node_histograms.size(); ++n) {
    const auto y = stats.Apply(cef.node_histograms[n]);
    const auto m = est.Estimate(nms.by_node[n]);
    for (size_t s = 0; s < y.size(); ++s) {
      EXPECT_EQ(m[s].value, static_cast<double>(y[s]));
      EXPECT_EQ(m[s].variance, 0.0);
    }
  }
}

TEST(NoisyMeasurementsTest, Deterministic) {
  const CefDataset cef = testing::SyntheticCef(testing::SmallSpec(), 1);
  const QueryMatrix q =
      QueryMatrix::Build(cef.schema, BudgetSchedule::Default());
  const auto a = MakeNoisyMeasurements(cef, q, 5);
  const auto b = MakeNoisyMeasurements(cef, q, 5);
  const auto c = MakeNoisyMeasurements(cef, q, 6);
  bool differs = false;
  for (size_t n = 0; n < a.by_node.size(); ++n) {
    EXPECT_EQ(a.by_node[n].values, b.by_node[n].values);
    differs |= a.by_node[n].values != c.by_node[n].values;
  }
  EXPECT_TRUE(differs);
}

TEST(NoisyMeasurementsTest, SchemaMismatch) {
  const CefDataset cef = testing::SyntheticCef(testing::SmallSpec(), 1);
  const QueryMatrix q =
      QueryMatrix::Build(CellSchema({{"c", 3}}), BudgetSchedule::Default());
  try {
    MakeNoisyMeasurements(cef, q, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
  }
}

// Chi-square fit of the per-query error over replicates.
TEST(NoisyMeasurementsTest, ErrorDistribution) {
  SpineSpec spec = testing::SmallSpec();
  spec.tracts_per_county = 1;
  spec.block_groups_per_tract = 1;
  spec.blocks_per_block_group = 1;
  const CefDataset cef = testing::SyntheticCef(spec, 2);
  const QueryMatrix q =
      QueryMatrix::Build(cef.schema, BudgetSchedule::Default());
  const NodeIndex block = cef.spine->NodesAtLevel(GeoLevel::kBlock).front();
  const auto exact = q.Evaluate(cef.at(block));
  const int query = q.Find("total");
  const double var = q.Variances(GeoLevel::kBlock)[query];
  const int K = 60;
  std::vector<double> counts(2 * K + 1, 0.0);
  const int R = 100000;
  for (int r = 0; r < R; ++r) {
    const auto nms = MakeNoisyMeasurements(cef, q, StreamSeed(3, std::to_string(r)));
    const int64_t e = std::clamp<int64_t>(
        nms.by_node[block].values[query] - exact[query], -K, K);
    counts[e + K] += 1;
  }
  std::vector<double> pmf(2 * K + 1);
  double z = 0;
  for (int k = -K; k <= K; ++k) z += pmf[k + K] = std::exp(-k * k / (2 * var));
  double stat = 0, exp_acc = 0, obs_acc = 0;
  int bins = 0;
  for (int i = 0; i <= 2 * K; ++i) {
    exp_acc += R * pmf[i] / z;
    obs_acc += counts[i];
    if (exp_acc >= 5 || i == 2 * K) {
      stat += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
      ++bins;
      exp_acc = obs_acc = 0;
    }
  }
  const double p = boost::math::cdf(boost::math::complement(
      boost::math::chi_squared(bins - 1), stat));
  EXPECT_GT(p, 0.01) << "chi2 " << stat << " bins " << bins;
}

TEST(NmStatisticsTest, OffSpineVarianceAddsUp) {
  const CefDataset cef = testing::SyntheticCef(SpineSpec{}, 3);
  const QueryMatrix q =
      QueryMatrix::Build(cef.schema, BudgetSchedule::Default());
  const AggregationMatrix stats = AggregationMatrix::Default(cef.schema);
  const NmEstimator est(q, stats);
  const auto nms = MakeNoisyMeasurements(cef, q, 8);
  const auto all = est.EstimateAll(nms);
  const Spine& spine = *cef.spine;
  for (const GeoId& id : spine.StandardUnits(GeoLevel::kBlockGroup)) {
    const auto out = NmStatistics(nms, q, stats, spine, id);
    const Composition c = ComposeTarget(spine, id);
    for (int s = 0; s < stats.num_rows(); ++s) {
      double value = 0, variance = 0;
      for (NodeIndex p : c.parts) {
        value += all[p][s].value;
        variance += all[p][s].variance;
      }
      EXPECT_NEAR(out[s].value, value, 1e-9);
      EXPECT_NEAR(out[s].variance, variance, 1e-9);
    }
  }
  // k parts of equal variance v give k v.
  const auto blocks = spine.NodesAtLevel(GeoLevel::kBlock);
  const std::vector<NodeIndex> parts = {blocks[0], blocks[5], blocks[11]};
  const auto sum = est.Compose(all, parts);
  EXPECT_NEAR(sum[0].variance, 3 * all[blocks[0]][0].variance, 1e-9);
}

TEST(NmStatisticsTest, DisjointTargetsUncorrelated) {
  const CefDataset cef = testing::SyntheticCef(testing::SmallSpec(), 4);
  const QueryMatrix q =
      QueryMatrix::Build(cef.schema, BudgetSchedule::Default());
  const AggregationMatrix stats = AggregationMatrix::Default(cef.schema);
  const NmEstimator est(q, stats);
  const auto& tracts = cef.spine->NodesAtLevel(GeoLevel::kTract);
  ASSERT_GE(tracts.size(), 2u);
  const int R = 4000;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int r = 0; r < R; ++r) {
    const auto nms = MakeNoisyMeasurements(cef, q, StreamSeed(6, std::to_string(r)));
    const double a = est.Estimate(nms.by_node[tracts[0]])[0].value -
                     static_cast<double>(cef.at(tracts[0]).Total());
    const double b = est.Estimate(nms.by_node[tracts[1]])[0].value -
                     static_cast<double>(cef.at(tracts[1]).Total());
    sa += a, sb += b, saa += a * a, sbb += b * b, sab += a * b;
  }
  const double cov = sab / R - sa / R * sb / R;
  const double r = cov / std::sqrt((saa / R - sa / R * sa / R) *
                                   (sbb / R - sb / R * sb / R));
  EXPECT_LT(std::abs(r), 4.0 / std::sqrt(R));
}

}  // namespace
}  // namespace dasim
