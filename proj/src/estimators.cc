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
#include <limits>
#include <numeric>
#include <set>

#include "dasim/csv.h"
#include "dasim/error.h"
#include "json.hpp"

namespace dasim {

namespace {

constexpr double kZ95 = 1.96;

template <typename V>
const V& Lookup(const std::map<std::string, V>& values, const std::string& id,
                std::string_view what) {
  auto it = values.find(id);
  if (it == values.end()) {
    throw Error(ErrorCode::kCoverageError,
                std::string(what) + " has no value for '" + id + "'");
  }
  return it->second;
}

void CheckStatistic(std::string_view column, const GeoSelection& sel) {
  if (!column.empty() && !sel.statistic.empty() && column != sel.statistic) {
    throw Error(ErrorCode::kUsageError,
                "column holds '" + std::string(column) +
                    "' but the selection asks for '" + sel.statistic + "'");
  }
}

double Size(const GeoSelection& sel) {
  ValidateSelection(sel);
  return static_cast<double>(sel.ids.size());
}

}  // namespace

void ValidateSelection(const GeoSelection& sel) {
  if (sel.ids.empty()) {
    throw Error(ErrorCode::kEmptyInput, "empty geography selection");
  }
  std::set<std::string> seen;
  for (const auto& id : sel.ids) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::kUsageError, "duplicate geography '" + id + "'");
    }
  }
}

std::string_view BiasMethodName(BiasMethod method) {
  switch (method) {
    case BiasMethod::kTopdownSingle:
      return "bias_topdown_single";
    case BiasMethod::kTopdownIndep:
      return "bias_topdown_indep";
    case BiasMethod::kTopdownTotal:
      return "bias_topdown_total";
    case BiasMethod::kSwapping:
      return "bias_swapping";
  }
  return "";
}

std::string_view MseMethodName(MseMethod method) {
  switch (method) {
    case MseMethod::kTopdown:
      return "mse_topdown";
    case MseMethod::kSwapping:
      return "mse_swapping";
    case MseMethod::kNmfExact:
      return "mse_nmf_exact";
  }
  return "";
}

BiasEstimate MakeBiasEstimate(double value, double variance, BiasMethod method,
                              int64_t n) {
  BiasEstimate b;
  b.value = value;
  b.variance = variance;
  b.method = method;
  const double half = kZ95 * std::sqrt(variance);
  b.ci_lo = value - half;
  b.ci_hi = value + half;
  b.n = n;
  return b;
}

MseEstimate MakeMseEstimate(double raw, MseMethod method, int64_t n) {
  MseEstimate m;
  m.raw = raw;
  m.clamped = std::max(raw, 0.0);
  m.rmse = std::sqrt(m.clamped);
  m.method = method;
  m.n = n;
  return m;
}

double EstimateBiasSingle(const Column& td, const MeasuredColumn& nm,
                          const GeoSelection& sel) {
  const double n = Size(sel);
  CheckStatistic(td.statistic, sel);
  CheckStatistic(nm.statistic, sel);
  double sum = 0.0;
  for (const auto& id : sel.ids) {
    sum += Lookup(td.values, id, "Y^td") - Lookup(nm.values, id, "Y^nm").value;
  }
  return sum / n;
}

BiasEstimate EstimateBiasIndep(const Column& td_tilde,
                               const MeasuredColumn& nm, const Column& td,
                               const GeoSelection& sel) {
  const double n = Size(sel);
  CheckStatistic(td_tilde.statistic, sel);
  CheckStatistic(td.statistic, sel);
  CheckStatistic(nm.statistic, sel);
  if (td_tilde.run == nm.run || td_tilde.run == td.run) {
    throw Error(ErrorCode::kUsageError,
                "the independent TopDown run must come from a different "
                "noise draw");
  }
  double diff = 0.0, gap = 0.0, sigma2 = 0.0;
  for (const auto& id : sel.ids) {
    const Measured& m = Lookup(nm.values, id, "Y^nm");
    const double tilde = Lookup(td_tilde.values, id, "Ytilde^td");
    diff += tilde - m.value;
    gap += Lookup(td.values, id, "Y^td") - tilde;
    sigma2 += m.variance;
  }
  const double variance = gap * gap / (2.0 * n * n) + sigma2 / (n * n);
  return MakeBiasEstimate(diff / n, variance, BiasMethod::kTopdownIndep,
                          static_cast<int64_t>(n));
}

BiasEstimate EstimateBiasSwap(const Column& sw, const MeasuredColumn& nm,
                              const GeoSelection& sel) {
  const double n = Size(sel);
  CheckStatistic(sw.statistic, sel);
  CheckStatistic(nm.statistic, sel);
  double sum = 0.0, squares = 0.0;
  for (const auto& id : sel.ids) {
    const double d =
        Lookup(sw.values, id, "Y^sw") - Lookup(nm.values, id, "Y^nm").value;
    sum += d;
    squares += d * d;
  }
  return MakeBiasEstimate(sum / n, squares / (n * n), BiasMethod::kSwapping,
                          static_cast<int64_t>(n));
}

BiasEstimate EstimateBiasTotal(const Column& td, const Column& td_tilde,
                               const Column& truth, const GeoSelection& sel) {
  const double n = Size(sel);
  CheckStatistic(td.statistic, sel);
  CheckStatistic(td_tilde.statistic, sel);
  CheckStatistic(truth.statistic, sel);
  if (td.run == td_tilde.run) {
    throw Error(ErrorCode::kUsageError, "two distinct TopDown runs required");
  }
  double e1 = 0.0, e2 = 0.0;
  for (const auto& id : sel.ids) {
    const double t = Lookup(truth.values, id, "truth");
    e1 += Lookup(td.values, id, "Y^td") - t;
    e2 += Lookup(td_tilde.values, id, "Ytilde^td") - t;
  }
  const double mu1 = e1 / n, mu2 = e2 / n;
  const double se = 0.5 * std::abs(mu1 - mu2);
  return MakeBiasEstimate(0.5 * (mu1 + mu2), se * se,
                          BiasMethod::kTopdownTotal, static_cast<int64_t>(n));
}

double EstimateTopdownVariance(const Column& td, const Column& td_tilde,
                               const GeoSelection& sel) {
  const double n = Size(sel);
  if (td.run == td_tilde.run) {
    throw Error(ErrorCode::kUsageError, "two distinct TopDown runs required");
  }
  double sum = 0.0;
  for (const auto& id : sel.ids) {
    const double d =
        Lookup(td.values, id, "Y^td") - Lookup(td_tilde.values, id, "Ytilde^td");
    sum += d * d;
  }
  return sum / (2.0 * n);
}

MseEstimate EstimateMse(const Column& source, const MeasuredColumn& nm,
                        const GeoSelection& sel, MseMethod method) {
  const double n = Size(sel);
  CheckStatistic(source.statistic, sel);
  CheckStatistic(nm.statistic, sel);
  if (method == MseMethod::kNmfExact) {
    throw Error(ErrorCode::kUsageError,
                "the exact NMF error needs only the measurements");
  }
  if (method == MseMethod::kTopdown && source.run == nm.run) {
    throw Error(ErrorCode::kUsageError,
                "TopDown MSE needs the run independent of the measurements");
  }
  double sum = 0.0;
  for (const auto& id : sel.ids) {
    const Measured& m = Lookup(nm.values, id, "Y^nm");
    const double d = Lookup(source.values, id, "source") - m.value;
    sum += d * d - m.variance;
  }
  return MakeMseEstimate(sum / n, method, static_cast<int64_t>(n));
}

MseEstimate NmfRmseExact(const MeasuredColumn& nm, const GeoSelection& sel) {
  const double n = Size(sel);
  CheckStatistic(nm.statistic, sel);
  double sum = 0.0;
  for (const auto& id : sel.ids) sum += Lookup(nm.values, id, "Y^nm").variance;
  return MakeMseEstimate(sum / n, MseMethod::kNmfExact,
                         static_cast<int64_t>(n));
}

std::vector<int> DecileBins(std::span<const int64_t> populations, int k) {
  if (populations.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no populations to bin");
  }
  if (k < 1) throw Error(ErrorCode::kParameterError, "need at least one bin");
  const size_t n = populations.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return populations[a] < populations[b];
  });
  std::vector<int> bins(n);
  int run_bin = 0;
  for (size_t pos = 0; pos < n; ++pos) {
    const size_t i = order[pos];
    if (pos == 0 || populations[i] != populations[order[pos - 1]]) {
      run_bin = static_cast<int>((pos * static_cast<size_t>(k)) / n);
    }
    bins[i] = run_bin;
  }
  return bins;
}

std::map<std::string, int> DecileBins(
    const std::map<std::string, int64_t>& populations, int k) {
  std::vector<int64_t> pops;
  for (const auto& [id, p] : populations) pops.push_back(p);
  const std::vector<int> bins = DecileBins(pops, k);
  std::map<std::string, int> out;
  size_t i = 0;
  for (const auto& [id, p] : populations) out[id] = bins[i++];
  return out;
}

std::optional<double> Correlation(std::span<const double> a,
                                  std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorCode::kParameterError,
                "correlation needs two equal-length vectors of length >= 2");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> RunCorrelation(const Column& err1, const Column& err2,
                                     const GeoSelection& sel) {
  Size(sel);
  std::vector<double> a, b;
  for (const auto& id : sel.ids) {
    a.push_back(Lookup(err1.values, id, "first error"));
    b.push_back(Lookup(err2.values, id, "second error"));
  }
  return Correlation(a, b);
}

int NumShareBins(double width) {
  if (!(width > 0.0) || width > 1.0) {
    throw Error(ErrorCode::kParameterError, "share bin width must be in (0, 1]");
  }
  return static_cast<int>(std::ceil(1.0 / width - 1e-9)) + 2;
}

int ShareBinIndex(double share, double width) {
  const int interior = NumShareBins(width) - 2;
  if (share < 0.0) return 0;
  if (share > 1.0) return interior + 1;
  const int slot = static_cast<int>(std::floor(share / width + 1e-9));
  return 1 + std::min(slot, interior - 1);
}

std::vector<ShareBin> BinnedBiasByShare(std::span<const double> errors,
                                        std::span<const double> shares,
                                        double width) {
  if (errors.size() != shares.size()) {
    throw Error(ErrorCode::kParameterError,
                "errors and shares differ in length");
  }
  const int count = NumShareBins(width);
  std::vector<ShareBin> bins(count);
  std::vector<std::vector<double>> members(count);
  for (size_t i = 0; i < errors.size(); ++i) {
    members[ShareBinIndex(shares[i], width)].push_back(errors[i]);
  }
  const double inf = std::numeric_limits<double>::infinity();
  for (int b = 0; b < count; ++b) {
    ShareBin& bin = bins[b];
    bin.index = b;
    bin.lo = b == 0 ? -inf : (b == count - 1 ? 1.0 : (b - 1) * width);
    bin.hi = b == 0 ? 0.0 : (b == count - 1 ? inf : std::min(1.0, b * width));
    const auto& v = members[b];
    bin.n = static_cast<int64_t>(v.size());
    if (v.empty()) continue;
    const double mean =
        std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    bin.mean = mean;
    if (v.size() > 1) {
      double ss = 0.0;
      for (double e : v) ss += (e - mean) * (e - mean);
      bin.se = std::sqrt(ss / (v.size() - 1)) / std::sqrt(double(v.size()));
    } else {
      bin.se = 0.0;
    }
  }
  return bins;
}

ReportRow ToReportRow(const BiasEstimate& b, std::string level,
                      std::string statistic, std::optional<int> bin) {
  ReportRow row;
  row.level = std::move(level);
  row.statistic = std::move(statistic);
  row.bin = bin;
  row.method = BiasMethodName(b.method);
  row.estimate = b.value;
  row.variance = b.variance;
  row.ci_lo = b.ci_lo;
  row.ci_hi = b.ci_hi;
  row.n = b.n;
  return row;
}

ReportRow ToReportRow(const MseEstimate& m, std::string level,
                      std::string statistic, std::optional<int> bin) {
  ReportRow row;
  row.level = std::move(level);
  row.statistic = std::move(statistic);
  row.bin = bin;
  row.method = MseMethodName(m.method);
  row.estimate = m.clamped;
  row.raw_mse = m.raw;
  row.rmse = m.rmse;
  row.n = m.n;
  return row;
}

const std::vector<std::string>& ErrorReport::CsvHeader() {
  static const std::vector<std::string> header = {
      "level", "statistic", "bin",      "method", "estimate", "variance",
      "ci_lo", "ci_hi",     "raw_mse", "rmse",   "n"};
  return header;
}

void ErrorReport::WriteCsv(std::ostream& out) const {
  const auto& header = CsvHeader();
  for (size_t i = 0; i < header.size(); ++i) {
    out << (i ? "," : "") << header[i];
  }
  out << '\n';
  for (const ReportRow& r : rows) {
    out << r.level << ',' << r.statistic << ','
        << (r.bin ? std::to_string(*r.bin) : std::string("all")) << ','
        << r.method << ',' << FormatOptional(r.estimate) << ','
        << FormatOptional(r.variance) << ',' << FormatOptional(r.ci_lo) << ','
        << FormatOptional(r.ci_hi) << ',' << FormatOptional(r.raw_mse) << ','
        << FormatOptional(r.rmse) << ',' << r.n << '\n';
  }
}

std::string ErrorReport::ToJson() const {
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  for (const ReportRow& r : rows) {
    nlohmann::ordered_json j;
    j["level"] = r.level;
    j["statistic"] = r.statistic;
    j["bin"] = r.bin ? nlohmann::ordered_json(*r.bin)
                     : nlohmann::ordered_json("all");
    j["method"] = r.method;
    j["estimate"] = opt(r.estimate);
    j["variance"] = opt(r.variance);
    j["ci_lo"] = opt(r.ci_lo);
    j["ci_hi"] = opt(r.ci_hi);
    j["raw_mse"] = opt(r.raw_mse);
    j["rmse"] = opt(r.rmse);
    j["n"] = r.n;
    rows_json.push_back(std::move(j));
  }
  nlohmann::ordered_json doc;
  doc["columns"] = CsvHeader();
  doc["rows"] = std::move(rows_json);
  return doc.dump(2) + "\n";
}

}  // namespace dasim
