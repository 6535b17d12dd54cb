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

#ifndef DASIM_ESTIMATORS_H_
#define DASIM_ESTIMATORS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dasim/geo.h"
#include "dasim/noise.h"

namespace dasim {

// The set I of geographies (one level) and the statistic s.
struct GeoSelection {
  GeoLevel level = GeoLevel::kBlock;
  std::vector<std::string> ids;
  std::string statistic;
};

// Throws Error(kEmptyInput) for no ids and Error(kUsageError) for duplicates.
void ValidateSelection(const GeoSelection& sel);

// Published values of one statistic by geography id, tagged with the noise
// draw that produced them.
struct Column {
  std::string run;
  std::string statistic;
  std::map<std::string, double> values;
};

// Y^nm with per-geography variances sigma^2.
struct MeasuredColumn {
  std::string run;
  std::string statistic;
  std::map<std::string, Measured> values;
};

enum class BiasMethod { kTopdownSingle, kTopdownIndep, kTopdownTotal, kSwapping };
enum class MseMethod { kTopdown, kSwapping, kNmfExact };

std::string_view BiasMethodName(BiasMethod method);
std::string_view MseMethodName(MseMethod method);

struct BiasEstimate {
  double value = 0.0;
  double variance = 0.0;
  BiasMethod method = BiasMethod::kTopdownIndep;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int64_t n = 0;
};

// ci = value -/+ 1.96 sqrt(variance).
BiasEstimate MakeBiasEstimate(double value, double variance, BiasMethod method,
                              int64_t n);

struct MseEstimate {
  double raw = 0.0;
  double clamped = 0.0;
  double rmse = 0.0;
  MseMethod method = MseMethod::kTopdown;
  int64_t n = 0;
};

MseEstimate MakeMseEstimate(double raw, MseMethod method, int64_t n);

// Every estimator below throws Error(kEmptyInput) for an empty selection and
// Error(kCoverageError) when a column lacks a selected geography.

// Mean of Y^td - Y^nm. No variance is identifiable for this estimator.
double EstimateBiasSingle(const Column& td, const MeasuredColumn& nm,
                          const GeoSelection& sel);

// Mean of Ytilde^td - Y^nm with variance
// (sum(Y^td - Ytilde^td))^2 / (2|I|^2) + sum(sigma^2) / |I|^2.
// Throws Error(kUsageError) if td_tilde shares a run with nm or td.
BiasEstimate EstimateBiasIndep(const Column& td_tilde,
                               const MeasuredColumn& nm, const Column& td,
                               const GeoSelection& sel);

// Mean of Y^sw - Y^nm with variance sum((Y^sw - Y^nm)^2) / |I|^2.
// Conservative only when swapping errors are not positively correlated
// across geographies.
BiasEstimate EstimateBiasSwap(const Column& sw, const MeasuredColumn& nm,
                              const GeoSelection& sel);

// For statistics known exactly (total population under swapping): the
// average of the two runs' mean errors against `truth`, with standard error
// |mu1 - mu2| / 2.
BiasEstimate EstimateBiasTotal(const Column& td, const Column& td_tilde,
                               const Column& truth, const GeoSelection& sel);

// Mean over I of (Y^td - Ytilde^td)^2 / 2, unbiased for the average TopDown
// error variance.
double EstimateTopdownVariance(const Column& td, const Column& td_tilde,
                               const GeoSelection& sel);

// raw = mean((Y^source - Y^nm)^2 - sigma^2). For kTopdown the source must be
// the run independent of Y^nm: Error(kUsageError) otherwise, and for
// kNmfExact (use NmfRmseExact).
MseEstimate EstimateMse(const Column& source, const MeasuredColumn& nm,
                        const GeoSelection& sel, MseMethod method);

// raw = mean sigma^2.
MseEstimate NmfRmseExact(const MeasuredColumn& nm, const GeoSelection& sel);

// Quantile bins 0..k-1 by population: sorted position p of n units goes to
// floor(p k / n), and tied populations share the lowest bin of their run.
// Throws Error(kEmptyInput) and Error(kParameterError) for k < 1.
std::vector<int> DecileBins(std::span<const int64_t> populations, int k = 10);
std::map<std::string, int> DecileBins(
    const std::map<std::string, int64_t>& populations, int k = 10);

// Pearson correlation, or nullopt when either vector has zero variance.
// Throws Error(kParameterError) on a length mismatch or fewer than 2 values.
std::optional<double> Correlation(std::span<const double> a,
                                  std::span<const double> b);
std::optional<double> RunCorrelation(const Column& err1, const Column& err2,
                                     const GeoSelection& sel);

struct ShareBin {
  int index = 0;
  double lo = 0.0;  // -inf for the below-zero bin
  double hi = 0.0;  // +inf for the above-one bin
  int64_t n = 0;
  std::optional<double> mean;
  std::optional<double> se;  // sd / sqrt(n), sd with n - 1 in the divisor
};

// Bin of a share: 0 below zero, then ceil(1 / width) bins over [0, 1] with
// 1.0 in the last of them, then one bin above one.
int ShareBinIndex(double share, double width = 0.04);
int NumShareBins(double width = 0.04);

// Mean error per share bin; empty bins have n = 0 and no mean.
std::vector<ShareBin> BinnedBiasByShare(std::span<const double> errors,
                                        std::span<const double> shares,
                                        double width = 0.04);

// One report line. Fields that do not apply to the method are empty.
struct ReportRow {
  std::string level;
  std::string statistic;
  std::optional<int> bin;  // empty for the whole level
  std::string method;
  std::optional<double> estimate;
  std::optional<double> variance;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  std::optional<double> raw_mse;
  std::optional<double> rmse;
  int64_t n = 0;
};

ReportRow ToReportRow(const BiasEstimate& b, std::string level,
                      std::string statistic, std::optional<int> bin);
ReportRow ToReportRow(const MseEstimate& m, std::string level,
                      std::string statistic, std::optional<int> bin);

struct ErrorReport {
  std::vector<ReportRow> rows;

  static const std::vector<std::string>& CsvHeader();
  void WriteCsv(std::ostream& out) const;
  std::string ToJson() const;
};

}  // namespace dasim

#endif  // DASIM_ESTIMATORS_H_
