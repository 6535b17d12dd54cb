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

#include "dasim/acceptance.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "dasim/artifacts.h"
#include "dasim/csv.h"
#include "dasim/discrete_gaussian.h"
#include "dasim/error.h"
#include "dasim/estimators.h"
#include "dasim/pipeline.h"
#include "dasim/report.h"
#include "dasim/rng.h"
#include "dasim/swapping.h"
#include "dasim/synthetic.h"
#include "dasim/topdown.h"

namespace dasim {

namespace {

namespace fs = std::filesystem;

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Running mean and variance.
struct Moments {
  int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void Add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double Variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
  double StdError() const { return std::sqrt(Variance() / n); }
};

struct Fixture {
  std::shared_ptr<const Spine> spine;
  CefDataset cef;
};

Fixture SyntheticWorld(const SpineSpec& spec, uint64_t seed,
                       const CellSchema& schema = CellSchema::Desk()) {
  auto spine = std::make_shared<const Spine>(
      Spine::Build(GenerateSyntheticBlocks(spec, StreamSeed(seed, "spine"))));
  CefDataset cef = GenerateSyntheticCef(spine, schema, SyntheticProfile{},
                                        StreamSeed(seed, "population"));
  return {spine, std::move(cef)};
}

std::vector<std::vector<int64_t>> NodeTruth(const CefDataset& cef,
                                            const AggregationMatrix& stats) {
  std::vector<std::vector<int64_t>> out;
  for (const Histogram& h : cef.node_histograms) out.push_back(stats.Apply(h));
  return out;
}

// ---------------------------------------------------------------------------

CriterionResult DiscreteGaussianFit(const AcceptanceOptions& o) {
  CriterionResult r{1, "discrete Gaussian chi-square fit", true, "", 0};
  const int64_t kSamples = 1'000'000;
  std::ostringstream d;
  for (double variance : {0.25, 1.0, 4.0, 25.0}) {
    Rng rng = MakeStream(o.seed, "c1:" + FormatNumber(variance));
    const double sigma = std::sqrt(variance);
    const int64_t K = static_cast<int64_t>(std::ceil(12.0 * sigma)) + 1;
    std::vector<int64_t> observed(2 * K + 1, 0);
    for (int64_t s = 0; s < kSamples; ++s) {
      const int64_t x =
          std::clamp<int64_t>(SampleDiscreteGaussian(variance, rng), -K, K);
      ++observed[x + K];
    }
    std::vector<double> pmf(2 * K + 1);
    double z = 0.0;
    for (int64_t k = -K; k <= K; ++k) {
      pmf[k + K] = std::exp(-static_cast<double>(k * k) / (2.0 * variance));
      z += pmf[k + K];
    }
    // Pool neighbouring values until every bin expects at least 5.
    std::vector<std::pair<double, double>> bins;  // expected, observed
    double e = 0.0, obs = 0.0;
    for (size_t i = 0; i < pmf.size(); ++i) {
      e += kSamples * pmf[i] / z;
      obs += static_cast<double>(observed[i]);
      if (e >= 5.0) {
        bins.push_back({e, obs});
        e = obs = 0.0;
      }
    }
    if (e > 0.0 || obs > 0.0) {
      bins.back().first += e;
      bins.back().second += obs;
    }
    double stat = 0.0;
    for (const auto& [ex, ob] : bins) stat += (ob - ex) * (ob - ex) / ex;
    const double df = static_cast<double>(bins.size()) - 1.0;
    const double p = boost::math::cdf(
        boost::math::complement(boost::math::chi_squared(df), stat));
    const bool ok = p > 0.01;
    r.pass &= ok;
    d << "var " << Num(variance) << ": chi2 " << Num(stat) << " df "
      << df << " p " << Num(p) << (ok ? "" : " FAIL") << "; ";
  }
  r.detail = d.str();
  return r;
}

// ---------------------------------------------------------------------------

CriterionResult NmfExactness(const AcceptanceOptions& o) {
  CriterionResult r{2, "NMF error variance and mean", true, "", 0};
  SpineSpec spec;
  spec.counties_per_state = 2;
  spec.tracts_per_county = 5;
  spec.block_groups_per_tract = 4;
  spec.blocks_per_block_group = 5;
  const Fixture world = SyntheticWorld(spec, StreamSeed(o.seed, "c2"));
  const QueryMatrix queries =
      QueryMatrix::Build(world.cef.schema, BudgetSchedule::Default());
  const AggregationMatrix stats = AggregationMatrix::Default(world.cef.schema);
  const NmEstimator estimator(queries, stats);
  const auto truth = NodeTruth(world.cef, stats);
  const int R = 10'000;
  const size_t nodes = world.spine->nodes().size();
  const int S = stats.num_rows();
  std::vector<double> sum_z2(S, 0.0), sum_z(S, 0.0);
  for (int rep = 0; rep < R; ++rep) {
    const NoisyMeasurements nms = MakeNoisyMeasurements(
        world.cef, queries, StreamSeed(o.seed, "c2:" + std::to_string(rep)));
    for (size_t n = 0; n < nodes; ++n) {
      const std::vector<Measured> est = estimator.Estimate(nms.by_node[n]);
      for (int s = 0; s < S; ++s) {
        const double z = (est[s].value - static_cast<double>(truth[n][s])) /
                         std::sqrt(est[s].variance);
        sum_z2[s] += z * z;
        sum_z[s] += z;
      }
    }
  }
  const double df = static_cast<double>(nodes) * R;
  boost::math::chi_squared chi(df);
  const double lo = boost::math::quantile(chi, 0.005) / df;
  const double hi = boost::math::quantile(chi, 0.995) / df;
  const double mean_tol = 4.0 / std::sqrt(df);
  std::ostringstream d;
  d << "blocks " << world.spine->num_blocks() << ", units " << nodes
    << ", R " << R << ", variance ratio band [" << Num(lo) << ", " << Num(hi)
    << "], mean band +-" << Num(mean_tol) << "; ";
  for (int s = 0; s < S; ++s) {
    const double ratio = sum_z2[s] / df;
    const double mean = sum_z[s] / df;
    const bool ok = ratio >= lo && ratio <= hi && std::abs(mean) <= mean_tol;
    r.pass &= ok;
    d << stats.row(s).label << " " << Num(ratio) << "/" << Num(mean)
      << (ok ? "" : " FAIL") << "; ";
  }
  r.detail = d.str();
  return r;
}

// ---------------------------------------------------------------------------

CriterionResult TopdownEstimators(const AcceptanceOptions& o) {
  CriterionResult r{3, "TopDown bias, variance and MSE estimators", true, "",
                    0};
  SpineSpec spec;
  spec.counties_per_state = 2;
  spec.tracts_per_county = 3;
  spec.block_groups_per_tract = 2;
  spec.blocks_per_block_group = 5;
  const Fixture world = SyntheticWorld(spec, StreamSeed(o.seed, "c3"));
  const QueryMatrix queries =
      QueryMatrix::Build(world.cef.schema, BudgetSchedule::Default());
  const AggregationMatrix stats = AggregationMatrix::Default(world.cef.schema);
  const NmEstimator estimator(queries, stats);
  const PostProcessConfig post;
  const auto truth = NodeTruth(world.cef, stats);
  const auto& blocks = world.spine->NodesAtLevel(GeoLevel::kBlock);
  const std::vector<std::string> checked = {"total", "voting_age"};
  const int R = 2000;

  GeoSelection sel{GeoLevel::kBlock, {}, ""};
  for (NodeIndex b : blocks) sel.ids.push_back(world.spine->node(b).key);

  struct Tally {
    Moments indep_gap, single_gap, indep, vhat, raw, mse;
  };
  std::map<std::string, Tally> tallies;
  for (int rep = 0; rep < R; ++rep) {
    const std::string tag = "c3:" + std::to_string(rep);
    auto [run1, run2] =
        RunTwice(world.cef, queries, stats, post, StreamSeed(o.seed, tag + ":1"),
                 StreamSeed(o.seed, tag + ":2"));
    for (const std::string& label : checked) {
      const int s = stats.IndexOf(label);
      Column td{"run1", label, {}}, tdt{"run2", label, {}},
          truth_col{"truth", label, {}};
      MeasuredColumn nm{"run1", label, {}};
      double e1 = 0.0, e2 = 0.0, sq2 = 0.0;
      for (NodeIndex b : blocks) {
        const std::string& id = world.spine->node(b).key;
        const double y = static_cast<double>(truth[b][s]);
        const double y1 = stats.Apply(run1.td.node_counts[b])[s];
        const double y2 = stats.Apply(run2.td.node_counts[b])[s];
        td.values[id] = y1;
        tdt.values[id] = y2;
        truth_col.values[id] = y;
        nm.values[id] = estimator.Estimate(run1.nms.by_node[b])[s];
        e1 += y1 - y;
        e2 += y2 - y;
        sq2 += (y2 - y) * (y2 - y);
      }
      sel.statistic = label;
      const double n = static_cast<double>(blocks.size());
      const double mu_td = 0.5 * (e1 + e2) / n;
      const BiasEstimate b = EstimateBiasIndep(tdt, nm, td, sel);
      const double single = EstimateBiasSingle(td, nm, sel);
      const MseEstimate m = EstimateMse(tdt, nm, sel, MseMethod::kTopdown);
      Tally& t = tallies[label];
      t.indep_gap.Add(b.value - mu_td);
      t.single_gap.Add(single - mu_td);
      t.indep.Add(b.value);
      t.vhat.Add(b.variance);
      t.raw.Add(m.raw);
      t.mse.Add(sq2 / n);
    }
  }
  std::ostringstream d;
  d << "blocks " << blocks.size() << ", R " << R << "; ";
  for (const std::string& label : checked) {
    const Tally& t = tallies[label];
    const bool bias_ok =
        std::abs(t.indep_gap.mean) <= 4.0 * t.indep_gap.StdError() &&
        std::abs(t.single_gap.mean) <= 4.0 * t.single_gap.StdError();
    const double v_ratio = t.vhat.mean / t.indep.Variance();
    const double mse_ratio = t.raw.mean / t.mse.mean;
    const bool v_ok = std::abs(v_ratio - 1.0) <= 0.10;
    const bool mse_ok = std::abs(mse_ratio - 1.0) <= 0.10;
    r.pass &= bias_ok && v_ok && mse_ok;
    d << label << ": mean bias " << Num(t.indep.mean) << ", gap "
      << Num(t.indep_gap.mean) << " (SE " << Num(t.indep_gap.StdError())
      << "), single-run gap " << Num(t.single_gap.mean) << " (SE "
      << Num(t.single_gap.StdError()) << ")" << (bias_ok ? "" : " FAIL")
      << ", E[Vhat]/Var " << Num(v_ratio) << (v_ok ? "" : " FAIL")
      << ", E[raw MSE]/MSE " << Num(mse_ratio) << " (MSE " << Num(t.mse.mean)
      << ")" << (mse_ok ? "" : " FAIL") << "; ";
  }
  r.detail = d.str();
  return r;
}

// ---------------------------------------------------------------------------

CriterionResult SwapConservative(const AcceptanceOptions& o) {
  CriterionResult r{4, "swapping variance estimator is conservative", true, "",
                    0};
  const Fixture world = SyntheticWorld(SpineSpec{}, StreamSeed(o.seed, "c4"));
  const QueryMatrix queries =
      QueryMatrix::Build(world.cef.schema, BudgetSchedule::Default());
  const AggregationMatrix stats = AggregationMatrix::Default(world.cef.schema);
  const NmEstimator estimator(queries, stats);
  const auto truth = NodeTruth(world.cef, stats);
  const auto& blocks = world.spine->NodesAtLevel(GeoLevel::kBlock);
  const std::string label = "white";
  const int s = stats.IndexOf(label);
  SwapConfig swap;
  swap.base_rate = 0.3;
  const int R = 2000;

  GeoSelection sel{GeoLevel::kBlock, {}, label};
  for (NodeIndex b : blocks) sel.ids.push_back(world.spine->node(b).key);
  Moments mu, vhat, sum_err;
  std::vector<double> mu_values;
  std::vector<Moments> per_block(blocks.size());
  int64_t pairs = 0;
  for (int rep = 0; rep < R; ++rep) {
    const std::string tag = "c4:" + std::to_string(rep);
    const NoisyMeasurements nms = MakeNoisyMeasurements(
        world.cef, queries, StreamSeed(o.seed, tag + ":noise"));
    swap.seed = StreamSeed(o.seed, tag + ":swap");
    const SwappedDataset sw = Swap(world.cef, swap);
    pairs += sw.stats.swapped_pairs;
    Column ysw{"swap", label, {}};
    MeasuredColumn nm{"noise", label, {}};
    double total_err = 0.0;
    for (size_t i = 0; i < blocks.size(); ++i) {
      const NodeIndex b = blocks[i];
      const std::string& id = world.spine->node(b).key;
      const double y = static_cast<double>(stats.Apply(sw.data.at(b))[s]);
      ysw.values[id] = y;
      nm.values[id] = estimator.Estimate(nms.by_node[b])[s];
      const double err = y - static_cast<double>(truth[b][s]);
      per_block[i].Add(err);
      total_err += err;
    }
    sum_err.Add(total_err);
    const BiasEstimate est = EstimateBiasSwap(ysw, nm, sel);
    mu.Add(est.value);
    mu_values.push_back(est.value);
    vhat.Add(est.variance);
  }
  double sum_var = 0.0;
  for (const Moments& m : per_block) sum_var += m.Variance();
  const double cross_cov = sum_err.Variance() - sum_var;
  // Var(s^2) is about (m4 - s^4) / R.
  double m4 = 0.0;
  for (double v : mu_values) m4 += std::pow(v - mu.mean, 4);
  m4 /= R;
  const double se_var =
      std::sqrt(std::max(0.0, m4 - mu.Variance() * mu.Variance()) / R);
  const double se = std::sqrt(vhat.StdError() * vhat.StdError() + se_var * se_var);
  const bool precondition = cross_cov <= 0.0;
  const bool ok = vhat.mean >= mu.Variance() - 2.0 * se;
  r.pass = precondition && ok;
  std::ostringstream d;
  d << "statistic " << label << ", blocks " << blocks.size() << ", R " << R
    << ", mean swapped pairs " << Num(static_cast<double>(pairs) / R)
    << "; cross-geography covariance sum " << Num(cross_cov)
    << (precondition ? " (non-positive)" : " (POSITIVE: precondition fails)")
    << "; E[Vhat] " << Num(vhat.mean) << " vs Var(mu) " << Num(mu.Variance())
    << " - 2 SE (" << Num(se) << ")" << (ok ? "" : " FAIL");
  r.detail = d.str();
  return r;
}

// ---------------------------------------------------------------------------

CriterionResult SwapInvariance(const AcceptanceOptions& o) {
  CriterionResult r{5, "swapping keeps total and voting-age counts", true, "",
                    0};
  SpineSpec spec;
  spec.states = 2;
  spec.counties_per_state = 2;
  spec.tracts_per_county = 3;
  spec.block_groups_per_tract = 2;
  spec.blocks_per_block_group = 4;
  const Fixture world = SyntheticWorld(spec, StreamSeed(o.seed, "c5"));
  const AggregationMatrix stats = AggregationMatrix::Default(world.cef.schema);
  const int total = stats.IndexOf("total");
  const int adults = stats.IndexOf("voting_age");
  const GeoLevel levels[] = {GeoLevel::kBlock,  GeoLevel::kBlockGroup,
                             GeoLevel::kTract,  GeoLevel::kCounty,
                             GeoLevel::kState,  GeoLevel::kVtd,
                             GeoLevel::kPlace,  GeoLevel::kNation};
  std::vector<std::vector<BlockIndex>> units;
  for (GeoLevel level : levels) {
    for (const GeoId& id : world.spine->StandardUnits(level)) {
      units.push_back(world.spine->BlocksOf(id));
    }
  }
  std::vector<std::vector<int64_t>> truth;
  for (const auto& u : units) truth.push_back(stats.Apply(world.cef.BlockSum(u)));

  const int R = 200;
  int64_t checks = 0, violations = 0, pairs = 0;
  for (GeoLevel scope : {GeoLevel::kCounty, GeoLevel::kState}) {
    SwapConfig swap;
    swap.base_rate = 0.3;
    swap.pairing_scope = scope;
    for (int rep = 0; rep < R; ++rep) {
      swap.seed = StreamSeed(o.seed, "c5:" + std::string(LevelName(scope)) +
                                         ":" + std::to_string(rep));
      const SwappedDataset sw = Swap(world.cef, swap);
      pairs += sw.stats.swapped_pairs;
      for (size_t u = 0; u < units.size(); ++u) {
        const std::vector<int64_t> y = stats.Apply(sw.data.BlockSum(units[u]));
        checks += 2;
        violations += (y[total] != truth[u][total]) +
                      (y[adults] != truth[u][adults]);
      }
    }
  }
  r.pass = violations == 0 && pairs > 0;
  r.detail = std::to_string(checks) + " integer comparisons over " +
             std::to_string(units.size()) + " geographies x " +
             std::to_string(2 * R) + " replicates, " +
             std::to_string(pairs) + " swapped pairs, " +
             std::to_string(violations) + " violations";
  return r;
}

// ---------------------------------------------------------------------------

// Spine with one block group of two blocks under a single-child chain.
std::shared_ptr<const Spine> TwoBlockSpine() {
  std::vector<BlockRecord> records;
  for (const char* geoid : {"530019501001010", "530019501001011"}) {
    records.push_back({MakeGeocode(GeoId{GeoLevel::kBlock, geoid},
                                   SpinePlacement{0, "10", "0001", "101"}),
                       "", ""});
  }
  return std::make_shared<const Spine>(Spine::Build(std::move(records)));
}

struct OracleOutcome {
  bool match = false;
  bool unique = false;
};

// Exhaustive search over every integer split of the parent cells between the
// two blocks, scoring (x - m)^2 / detail_var + (sum x - t)^2 / total_var.
OracleOutcome CheckTwoBlockFixture(int cells, uint64_t seed) {
  const auto spine = TwoBlockSpine();
  const CellSchema schema({{"c", cells}});
  Rng rng = MakeStream(seed, "fixture");
  std::uniform_int_distribution<int> count(0, 3);
  std::vector<Histogram> blocks;
  for (int b = 0; b < 2; ++b) {
    std::vector<int64_t> v(cells);
    for (auto& x : v) x = count(rng);
    blocks.emplace_back(v);
  }
  const CefDataset cef = MakeCefDataset(spine, schema, blocks);
  BudgetSchedule budget = BudgetSchedule::Zero();
  const double detail_var = 1.0, total_var = 2.0;
  budget.Set(GeoLevel::kBlock, QueryGroup::kDetail, detail_var);
  budget.Set(GeoLevel::kBlock, QueryGroup::kTotal, total_var);
  const QueryMatrix queries = QueryMatrix::Build(schema, budget, true, true, false);
  const AggregationMatrix stats(schema,
                                {{"total", std::vector<int32_t>(cells, 1)}});
  PostProcessConfig post;
  post.invariants.clear();
  const NoisyMeasurements nms =
      MakeNoisyMeasurements(cef, queries, StreamSeed(seed, "noise"));
  const PostProcessedDataset td =
      TopDownPostprocess(nms, cef, queries, stats, post);

  const auto& leaves = spine->NodesAtLevel(GeoLevel::kBlock);
  const Histogram parent = blocks[0] + blocks[1];
  const int total_q = queries.Find("total");
  auto score = [&](const std::vector<int64_t>& x0) {
    double f = 0.0;
    for (int c = 0; c < 2; ++c) {
      const auto& m = nms.by_node[leaves[c]].values;
      int64_t sum = 0;
      for (int i = 0; i < cells; ++i) {
        const int64_t x = c == 0 ? x0[i] : parent[i] - x0[i];
        const double diff = static_cast<double>(
            x - m[queries.Find("detail/" + std::to_string(i))]);
        f += diff * diff / detail_var;
        sum += x;
      }
      const double t = static_cast<double>(sum - m[total_q]);
      f += t * t / total_var;
    }
    return f;
  };
  std::vector<int64_t> x0(cells, 0), best;
  double best_score = std::numeric_limits<double>::infinity();
  int minimizers = 0;
  while (true) {
    const double f = score(x0);
    if (f < best_score - 1e-9) {
      best_score = f;
      best = x0;
      minimizers = 1;
    } else if (std::abs(f - best_score) <= 1e-9) {
      ++minimizers;
    }
    int i = 0;
    while (i < cells && x0[i] == parent[i]) x0[i++] = 0;
    if (i == cells) break;
    ++x0[i];
  }
  std::vector<int64_t> got(cells);
  for (int i = 0; i < cells; ++i) {
    got[i] = std::llround(td.node_counts[leaves[0]][i]);
  }
  OracleOutcome out;
  out.unique = minimizers == 1;
  out.match = std::abs(score(got) - best_score) <= 1e-9 &&
              (!out.unique || got == best);
  return out;
}

CriterionResult TopdownConstraints(const AcceptanceOptions& o) {
  CriterionResult r{6, "TopDown constraints and exhaustive oracle", true, "",
                    0};
  const Fixture world = SyntheticWorld(SpineSpec{}, StreamSeed(o.seed, "c6"));
  const QueryMatrix queries =
      QueryMatrix::Build(world.cef.schema, BudgetSchedule::Default());
  const AggregationMatrix stats = AggregationMatrix::Default(world.cef.schema);
  const PostProcessConfig post;
  const Spine& spine = *world.spine;
  const int R = 50;
  int64_t negative = 0, fractional = 0, inconsistent = 0, invariant = 0;
  for (int rep = 0; rep < R; ++rep) {
    const NoisyMeasurements nms = MakeNoisyMeasurements(
        world.cef, queries, StreamSeed(o.seed, "c6:" + std::to_string(rep)));
    const PostProcessedDataset td =
        TopDownPostprocess(nms, world.cef, queries, stats, post);
    for (size_t n = 0; n < spine.nodes().size(); ++n) {
      const auto& x = td.node_counts[n];
      for (double v : x) {
        negative += v < 0.0;
        fractional += v != std::floor(v);
      }
      const SpineNode& node = spine.node(static_cast<NodeIndex>(n));
      if (!node.children.empty()) {
        std::vector<double> sum(x.size(), 0.0);
        for (NodeIndex c : node.children) {
          for (size_t i = 0; i < x.size(); ++i) sum[i] += td.node_counts[c][i];
        }
        inconsistent += sum != x;
      }
      if (node.level == GeoLevel::kState || node.level == GeoLevel::kNation) {
        const double t = std::accumulate(x.begin(), x.end(), 0.0);
        invariant +=
            t != static_cast<double>(world.cef.at(static_cast<NodeIndex>(n)).Total());
      }
    }
  }
  int fixtures = 0, matched = 0, unique = 0;
  for (int cells : {2, 3}) {
    for (int f = 0; f < 100; ++f) {
      const OracleOutcome out = CheckTwoBlockFixture(
          cells, StreamSeed(o.seed, "c6:fixture:" + std::to_string(cells) +
                                        ":" + std::to_string(f)));
      ++fixtures;
      matched += out.match;
      unique += out.unique;
    }
  }
  r.pass = negative == 0 && fractional == 0 && inconsistent == 0 &&
           invariant == 0 && matched == fixtures;
  std::ostringstream d;
  d << R << " runs on " << spine.num_blocks() << " blocks: negative "
    << negative << ", non-integer " << fractional << ", parent-sum breaks "
    << inconsistent << ", state/nation total breaks " << invariant
    << "; exhaustive oracle " << matched << "/" << fixtures
    << " fixtures matched (" << unique << " with a unique optimum)";
  r.detail = d.str();
  return r;
}

// ---------------------------------------------------------------------------

CriterionResult CrosswalkChecks(const AcceptanceOptions& o) {
  CriterionResult r{7, "geocode crosswalk and composition", true, "", 0};
  const std::string example = "0531000100011065300195010011010";
  const std::string geoid = ToGeoid(ParseGeocode(example)).code;
  const bool example_ok = geoid == "530019501001010";

  Rng rng = MakeStream(o.seed, "c7");
  auto digits = [&](int n) {
    std::uniform_int_distribution<int> d(0, 9);
    std::string s;
    for (int i = 0; i < n; ++i) s += static_cast<char>('0' + d(rng));
    return s;
  };
  int failures = 0;
  const int kCodes = 100'000;
  for (int i = 0; i < kCodes; ++i) {
    const std::string bg = digits(1);
    const GeoId block{GeoLevel::kBlock,
                      digits(2) + digits(3) + digits(6) + bg + digits(3)};
    SpinePlacement place{static_cast<int>(rng() % 2), digits(2), digits(4),
                         digits(3)};
    try {
      const GeoCode g = MakeGeocode(block, place);
      const GeoCode back = ParseGeocode(g.ToString());
      if (!(back == g) || ToGeoid(back).code != block.code ||
          back.raw.size() != 31) {
        ++failures;
      }
    } catch (const Error&) {
      ++failures;
    }
  }

  SpineSpec spec;
  spec.states = 2;
  spec.counties_per_state = 3;
  spec.tracts_per_county = 4;
  spec.block_groups_per_tract = 3;
  spec.blocks_per_block_group = 5;
  const Fixture world = SyntheticWorld(spec, StreamSeed(o.seed, "c7:world"));
  int targets = 0, bad = 0;
  for (GeoLevel level :
       {GeoLevel::kBlock, GeoLevel::kBlockGroup, GeoLevel::kTract,
        GeoLevel::kCounty, GeoLevel::kState, GeoLevel::kVtd, GeoLevel::kPlace,
        GeoLevel::kNation}) {
    for (const GeoId& id : world.spine->StandardUnits(level)) {
      ++targets;
      const Composition comp = ComposeTarget(*world.spine, id);
      std::vector<BlockIndex> covered;
      for (NodeIndex p : comp.parts) {
        const auto& b = world.spine->node(p).blocks;
        covered.insert(covered.end(), b.begin(), b.end());
      }
      std::sort(covered.begin(), covered.end());
      const bool disjoint =
          std::adjacent_find(covered.begin(), covered.end()) == covered.end();
      bad += !(disjoint && covered == world.spine->BlocksOf(id));
    }
  }
  r.pass = example_ok && failures == 0 && bad == 0;
  r.detail = "example -> " + geoid + (example_ok ? "" : " FAIL") + "; " +
             std::to_string(kCodes) + " round trips, " +
             std::to_string(failures) + " failures; " +
             std::to_string(targets) + " composed targets, " +
             std::to_string(bad) + " partition failures";
  return r;
}

// ---------------------------------------------------------------------------

CriterionResult QualitativePatterns(const AcceptanceOptions& o) {
  CriterionResult r{8, "NMF vs TopDown RMSE and composition scaling", true, "",
                    0};
  RunConfig config;
  config.seed = StreamSeed(o.seed, "c8");
  config.topdown_runs = 1;
  config.swap_enabled = false;
  const World world = BuildWorld(config);
  const Spine& spine = world.spine();
  const int total = world.stats.IndexOf("total");
  const auto truth = NodeTruth(world.cef, world.stats);
  const auto& blocks = spine.NodesAtLevel(GeoLevel::kBlock);

  // Block-level total population: exact NMF RMSE vs realized TopDown RMSE.
  const int R_td = 30;
  Moments nmf_var, td_sq;
  for (int rep = 0; rep < R_td; ++rep) {
    const NoisyMeasurements nms = MakeNoisyMeasurements(
        world.cef, world.queries,
        StreamSeed(o.seed, "c8:td:" + std::to_string(rep)));
    const PostProcessedDataset td = TopDownPostprocess(
        nms, world.cef, world.queries, world.stats, config.postprocess);
    for (NodeIndex b : blocks) {
      nmf_var.Add(world.estimator.Estimate(nms.by_node[b])[total].variance);
      const double y = world.stats.Apply(td.node_counts[b])[total];
      const double e = y - static_cast<double>(truth[b][total]);
      td_sq.Add(e * e);
    }
  }
  const double nmf_rmse = std::sqrt(nmf_var.mean);
  const double td_rmse = std::sqrt(td_sq.mean);
  const bool order_ok = nmf_rmse > td_rmse;

  // Off-spine targets: one block from each of k distinct optimized block
  // groups of at least two blocks, so the composition has exactly k parts.
  std::vector<NodeIndex> picks;
  for (NodeIndex g : spine.NodesAtLevel(GeoLevel::kOptBlockGroup)) {
    if (spine.node(g).children.size() >= 2) {
      picks.push_back(spine.node(g).children.front());
    }
  }
  const int R_nm = 400;
  std::map<int, Moments> sq_err;
  std::map<int, double> formula;
  bool parts_ok = true;
  std::vector<int> ks;
  for (int k = 1; k <= static_cast<int>(picks.size()) / 2 && k <= 8; k *= 2) {
    ks.push_back(k);
  }
  std::map<int, std::vector<std::vector<NodeIndex>>> targets;
  for (int k : ks) {
    for (size_t t = 0; (t + 1) * k <= picks.size(); ++t) {
      std::vector<BlockIndex> members;
      for (int j = 0; j < k; ++j) {
        members.push_back(spine.node(picks[t * k + j]).blocks.front());
      }
      std::vector<NodeIndex> parts = ComposeBlocks(spine, members);
      parts_ok &= static_cast<int>(parts.size()) == k;
      targets[k].push_back(std::move(parts));
    }
  }
  for (int rep = 0; rep < R_nm; ++rep) {
    const NoisyMeasurements nms = MakeNoisyMeasurements(
        world.cef, world.queries,
        StreamSeed(o.seed, "c8:nm:" + std::to_string(rep)));
    const auto est = world.estimator.EstimateAll(nms);
    for (int k : ks) {
      for (const auto& parts : targets[k]) {
        const std::vector<Measured> m = world.estimator.Compose(est, parts);
        double y = 0.0;
        for (NodeIndex p : parts) y += static_cast<double>(truth[p][total]);
        const double e = m[total].value - y;
        sq_err[k].Add(e * e);
        formula[k] = m[total].variance;
      }
    }
  }
  std::ostringstream d;
  d << "block total RMSE: NMF " << Num(nmf_rmse) << " > TopDown "
    << Num(td_rmse) << (order_ok ? "" : " FAIL") << "; sqrt(k) scaling";
  bool scaling_ok = parts_ok && ks.size() >= 3;
  const double base = std::sqrt(sq_err[1].mean);
  double previous = 0.0;
  for (int k : ks) {
    const double rmse = std::sqrt(sq_err[k].mean);
    const double ratio = rmse / (std::sqrt(static_cast<double>(k)) * base);
    const double formula_ratio =
        std::sqrt(formula[k] / (k * formula[1]));
    const bool ok = std::abs(ratio - 1.0) <= 0.10 &&
                    std::abs(formula_ratio - 1.0) <= 0.10 && rmse > previous;
    scaling_ok &= ok;
    previous = rmse;
    d << " k=" << k << " rmse " << Num(rmse) << " ratio " << Num(ratio)
      << (ok ? "" : " FAIL");
  }
  if (!parts_ok) d << " (a target did not compose into k parts)";
  r.pass = order_ok && scaling_ok;
  r.detail = d.str();
  return r;
}

// ---------------------------------------------------------------------------

template <typename F>
bool Throws(ErrorCode code, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

CriterionResult DegenerateInputs(const AcceptanceOptions& o) {
  CriterionResult r{9, "degenerate inputs", true, "", 0};
  std::ostringstream d;

  // Zero-noise identity through simulate and report.
  RunConfig config;
  config.seed = StreamSeed(o.seed, "c9");
  config.budget = BudgetSchedule::Zero();
  config.swap.base_rate = 0.0;
  config.swap.risk_weight = 0.0;
  const fs::path dir = fs::temp_directory_path() /
                       ("dasim_acceptance_" + std::to_string(o.seed));
  fs::remove_all(dir);
  Simulate(config, dir);
  const ReportFiles report = BuildReport(dir, ReportOptions{});
  int nonzero = 0;
  for (const ReportRow& row : report.report.rows) {
    for (const auto& v : {row.estimate, row.variance, row.rmse, row.raw_mse}) {
      nonzero += v && *v != 0.0;
    }
  }
  const World world = BuildWorld(config);
  const Replicate rep = RunReplicate(world, config, 1);
  int td_mismatch = 0;
  for (size_t n = 0; n < world.spine().nodes().size(); ++n) {
    const Histogram& h = world.cef.at(static_cast<NodeIndex>(n));
    for (int c = 0; c < h.size(); ++c) {
      td_mismatch += rep.td1.node_counts[n][c] != static_cast<double>(h[c]);
    }
  }
  fs::remove_all(dir);
  const bool zero_ok = nonzero == 0 && td_mismatch == 0 && !report.report.rows.empty();
  d << "zero noise: " << report.report.rows.size() << " report rows, "
    << nonzero << " non-zero, " << td_mismatch << " TopDown cells off"
    << (zero_ok ? "" : " FAIL") << "; ";

  // Empty selections.
  const GeoSelection empty{GeoLevel::kBlock, {}, "total"};
  const Column col{"a", "total", {}};
  const MeasuredColumn nm{"b", "total", {}};
  const bool empty_ok =
      Throws(ErrorCode::kEmptyInput,
             [&] { EstimateBiasSingle(col, nm, empty); }) &&
      Throws(ErrorCode::kEmptyInput,
             [&] { EstimateBiasIndep(Column{"c", "total", {}}, nm, col, empty); }) &&
      Throws(ErrorCode::kEmptyInput, [&] { EstimateBiasSwap(col, nm, empty); }) &&
      Throws(ErrorCode::kEmptyInput,
             [&] { EstimateMse(col, nm, empty, MseMethod::kSwapping); }) &&
      Throws(ErrorCode::kEmptyInput, [&] { NmfRmseExact(nm, empty); }) &&
      Throws(ErrorCode::kEmptyInput,
             [&] { DecileBins(std::vector<int64_t>{}); });
  d << "empty selections rejected " << (empty_ok ? "yes" : "NO FAIL") << "; ";

  // All ties.
  const std::vector<int> bins = DecileBins(std::vector<int64_t>(25, 7));
  const bool ties_ok =
      std::all_of(bins.begin(), bins.end(), [](int b) { return b == 0; });
  d << "all-ties binning " << (ties_ok ? "single bin" : "FAIL") << "; ";

  // Negative MSE.
  MeasuredColumn measured{"nm", "total", {}};
  Column source{"other", "total", {}};
  GeoSelection sel{GeoLevel::kBlock, {}, "total"};
  for (int i = 0; i < 5; ++i) {
    const std::string id = "g" + std::to_string(i);
    measured.values[id] = Measured{10.0 + i, 4.0};
    source.values[id] = 10.0 + i;
    sel.ids.push_back(id);
  }
  const MseEstimate m = EstimateMse(source, measured, sel, MseMethod::kTopdown);
  const bool clamp_ok = m.raw == -4.0 && m.clamped == 0.0 && m.rmse == 0.0;
  d << "negative MSE raw " << Num(m.raw) << " clamped " << Num(m.clamped)
    << (clamp_ok ? "" : " FAIL");

  r.pass = zero_ok && empty_ok && ties_ok && clamp_ok;
  r.detail = d.str();
  return r;
}

}  // namespace

CriterionResult RunCriterion(int id, const AcceptanceOptions& options) {
  using Runner = CriterionResult (*)(const AcceptanceOptions&);
  static const Runner kRunners[] = {
      DiscreteGaussianFit, NmfExactness,     TopdownEstimators,
      SwapConservative,    SwapInvariance,   TopdownConstraints,
      CrosswalkChecks,     QualitativePatterns, DegenerateInputs};
  if (id < 1 || id > kNumCriteria) {
    throw Error(ErrorCode::kUsageError,
                "no acceptance criterion " + std::to_string(id));
  }
  const auto start = std::chrono::steady_clock::now();
  CriterionResult result;
  try {
    result = kRunners[id - 1](options);
  } catch (const std::exception& e) {
    result.id = id;
    result.title = "criterion raised an error";
    result.pass = false;
    result.detail = e.what();
  }
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  // Runtime limits.
  const double limit = id == 1 ? 30.0 : id == 3 ? 600.0 : id == 8 ? 300.0 : 0.0;
  if (limit > 0.0 && result.seconds > limit) {
    result.pass = false;
    result.detail += " (over the " + Num(limit) + " s limit)";
  }
  return result;
}

std::vector<CriterionResult> RunAcceptance(const AcceptanceOptions& options,
                                           std::ostream* log) {
  std::vector<int> ids = options.criteria;
  if (ids.empty()) {
    for (int i = 1; i <= kNumCriteria; ++i) ids.push_back(i);
  }
  std::vector<CriterionResult> results;
  for (int id : ids) {
    results.push_back(RunCriterion(id, options));
    if (log) *log << FormatResult(results.back()) << std::endl;
  }
  return results;
}

std::string FormatResult(const CriterionResult& result) {
  char seconds[32];
  std::snprintf(seconds, sizeof(seconds), "%.1f", result.seconds);
  return std::string(result.pass ? "PASS" : "FAIL") + " criterion " +
         std::to_string(result.id) + ": " + result.title + " [" + seconds +
         " s] " + result.detail;
}

}  // namespace dasim
