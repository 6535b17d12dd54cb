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

#include "dasim/report.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>

#include "dasim/artifacts.h"
#include "dasim/config.h"
#include "dasim/error.h"
#include "dasim/pipeline.h"

namespace dasim {

namespace fs = std::filesystem;

namespace {

const char* kSingle = "bias_topdown_single";
const char* kIndep = "bias_topdown_indep";
const char* kTotal = "bias_topdown_total";
const char* kSwapBias = "bias_swapping";
const char* kMseTd = "mse_topdown";
const char* kMseSw = "mse_swapping";
const char* kMseNm = "mse_nmf_exact";

bool ExactUnderSwapping(const std::string& statistic) {
  return statistic == "total" || statistic == "voting_age";
}

struct ReplicateTables {
  LevelTable nm, td1;
  std::optional<LevelTable> td2, sw;
};

// Running means of the per-replicate estimates of one report cell.
struct Accumulator {
  double estimate = 0.0;
  double variance = 0.0;
  double raw = 0.0;
  int count = 0;
  int64_t n = 0;
};

double Quantile(const std::vector<double>& sorted, double p) {
  const size_t rank = static_cast<size_t>(std::ceil(p * sorted.size()));
  return sorted[std::max<size_t>(rank, 1) - 1];
}

}  // namespace

const std::vector<std::string>& AllReportMethods() {
  static const std::vector<std::string> methods = {
      kSingle, kIndep, kTotal, kSwapBias, kMseTd, kMseSw, kMseNm};
  return methods;
}

ReportFiles BuildReport(const fs::path& dir, const ReportOptions& options) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "no artifact directory " + dir.string());
  }
  const RunConfig config = LoadRunConfig(dir / "config.json");
  const bool two_runs = config.topdown_runs == 2;
  const bool swapped = config.swap_enabled;

  std::vector<std::string> methods = options.methods;
  if (methods.empty()) {
    for (const std::string& m : AllReportMethods()) {
      const bool needs_two = m == kIndep || m == kTotal || m == kMseTd;
      const bool needs_swap = m == kSwapBias || m == kMseSw;
      if ((needs_two && !two_runs) || (needs_swap && !swapped)) continue;
      methods.push_back(m);
    }
  }
  for (const std::string& m : methods) {
    const auto& all = AllReportMethods();
    if (std::find(all.begin(), all.end(), m) == all.end()) {
      throw Error(ErrorCode::kUsageError, "unknown report method '" + m + "'");
    }
    if ((m == kIndep || m == kTotal || m == kMseTd) && !two_runs) {
      throw Error(ErrorCode::kUsageError,
                  m + " needs a second independent TopDown run");
    }
    if ((m == kSwapBias || m == kMseSw) && !swapped) {
      throw Error(ErrorCode::kUsageError, m + " needs swapped outputs");
    }
  }
  auto wants = [&](const char* m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
  };

  std::vector<GeoLevel> levels =
      options.levels.empty() ? config.report_levels : options.levels;
  for (GeoLevel l : levels) {
    if (std::find(config.report_levels.begin(), config.report_levels.end(),
                  l) == config.report_levels.end()) {
      throw Error(ErrorCode::kUsageError,
                  "level " + std::string(LevelName(l)) + " was not simulated");
    }
  }

  ReportFiles files;
  files.abs_error.header = {"level", "method", "n",   "mean",
                            "p50",   "p90",    "p99", "max"};
  files.run_correlation.header = {"level", "statistic", "replicate", "n",
                                  "correlation"};
  files.share_bins.header = {"level", "method", "bin", "lo",
                             "hi",    "n",      "mean", "se"};
  const int R = config.replicates;

  for (GeoLevel level : levels) {
    const std::string name(LevelName(level));
    const LevelTable truth =
        ReadLevelTable(dir / "truth" / (name + ".csv"), level);
    std::vector<std::string> statistics =
        options.statistics.empty() ? truth.statistics : options.statistics;
    for (const std::string& s : statistics) truth.StatisticIndex(s);

    std::map<std::string, int64_t> pops;
    const int total = truth.StatisticIndex("total");
    for (size_t u = 0; u < truth.ids.size(); ++u) {
      pops[truth.ids[u]] = std::llround(truth.values[u][total]);
    }
    const std::map<std::string, int> bins = DecileBins(pops, options.bins);
    std::vector<GeoSelection> selections;  // index 0: every unit
    selections.push_back({level, truth.ids, ""});
    for (int b = 0; b < options.bins; ++b) {
      GeoSelection sel{level, {}, ""};
      for (const std::string& id : truth.ids) {
        if (bins.at(id) == b) sel.ids.push_back(id);
      }
      selections.push_back(std::move(sel));
    }

    // (statistic, selection, method) -> running sums.
    std::map<std::tuple<std::string, int, std::string>, Accumulator> acc;
    std::map<std::string, std::vector<double>> abs_errors;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
        share_data;
    const Column truth_total = truth.ToColumn("total", "truth");

    for (int r = 1; r <= R; ++r) {
      const fs::path rep = dir / ReplicateDirName(r);
      ReplicateTables t{ReadLevelTable(rep / ("nm_" + name + ".csv"), level),
                        ReadLevelTable(rep / ("td1_" + name + ".csv"), level),
                        std::nullopt, std::nullopt};
      if (two_runs) {
        t.td2 = ReadLevelTable(rep / ("td2_" + name + ".csv"), level);
      }
      if (swapped) t.sw = ReadLevelTable(rep / ("sw_" + name + ".csv"), level);

      // Absolute total-population errors against the CEF.
      {
        const MeasuredColumn nm = t.nm.ToMeasuredColumn("total", "run1");
        const Column td = t.td1.ToColumn("total", "run1");
        for (const auto& [id, v] : truth_total.values) {
          abs_errors["nmf"].push_back(std::abs(nm.values.at(id).value - v));
          abs_errors["topdown"].push_back(std::abs(td.values.at(id) - v));
          if (t.sw) {
            abs_errors["swapping"].push_back(
                std::abs(t.sw->ToColumn("total", "sw").values.at(id) - v));
          }
        }
      }

      for (const std::string& stat : statistics) {
        const MeasuredColumn nm = t.nm.ToMeasuredColumn(stat, "run1");
        const Column td1 = t.td1.ToColumn(stat, "run1");
        std::optional<Column> td2, sw;
        if (t.td2) td2 = t.td2->ToColumn(stat, "run2");
        if (t.sw) sw = t.sw->ToColumn(stat, "swap");
        const Column truth_col = truth.ToColumn(stat, "truth");

        if (td2 && ExactUnderSwapping(stat)) {
          Column e1{"run1", stat, {}}, e2{"run2", stat, {}};
          for (const auto& [id, v] : truth_col.values) {
            e1.values[id] = td1.values.at(id) - v;
            e2.values[id] = td2->values.at(id) - v;
          }
          const auto corr = selections[0].ids.size() >= 2
                                ? RunCorrelation(e1, e2, selections[0])
                                : std::nullopt;
          files.run_correlation.rows.push_back(
              {name, stat, std::to_string(r),
               std::to_string(selections[0].ids.size()),
               corr ? FormatNumber(*corr) : std::string("undefined")});
        }

        for (size_t k = 0; k < selections.size(); ++k) {
          GeoSelection sel = selections[k];
          if (sel.ids.empty()) continue;
          sel.statistic = stat;
          const int key = static_cast<int>(k);
          auto add_bias = [&](const char* m, const BiasEstimate& b) {
            Accumulator& a = acc[{stat, key, m}];
            a.estimate += b.value;
            a.variance += b.variance;
            a.n = b.n;
            ++a.count;
          };
          auto add_mse = [&](const char* m, const MseEstimate& e) {
            Accumulator& a = acc[{stat, key, m}];
            a.raw += e.raw;
            a.n = e.n;
            ++a.count;
          };
          if (wants(kSingle)) {
            Accumulator& a = acc[{stat, key, kSingle}];
            a.estimate += EstimateBiasSingle(td1, nm, sel);
            a.n = static_cast<int64_t>(sel.ids.size());
            ++a.count;
          }
          if (td2 && wants(kIndep)) {
            add_bias(kIndep, EstimateBiasIndep(*td2, nm, td1, sel));
          }
          if (td2 && wants(kTotal) && ExactUnderSwapping(stat)) {
            add_bias(kTotal, EstimateBiasTotal(td1, *td2, truth_col, sel));
          }
          if (sw && wants(kSwapBias)) {
            add_bias(kSwapBias, EstimateBiasSwap(*sw, nm, sel));
          }
          if (td2 && wants(kMseTd)) {
            add_mse(kMseTd, EstimateMse(*td2, nm, sel, MseMethod::kTopdown));
          }
          if (sw && wants(kMseSw)) {
            add_mse(kMseSw, EstimateMse(*sw, nm, sel, MseMethod::kSwapping));
          }
          if (wants(kMseNm)) add_mse(kMseNm, NmfRmseExact(nm, sel));
        }

        if (stat == "non_white") {
          for (const auto& [id, tot] : truth_total.values) {
            if (tot == 0.0) continue;
            const double share = nm.values.at(id).value / tot;
            if (td2) {
              share_data["topdown"].first.push_back(td2->values.at(id) -
                                                    nm.values.at(id).value);
              share_data["topdown"].second.push_back(share);
            }
            if (sw) {
              share_data["swapping"].first.push_back(sw->values.at(id) -
                                                     nm.values.at(id).value);
              share_data["swapping"].second.push_back(share);
            }
          }
        }
      }
    }

    for (const std::string& stat : statistics) {
      for (size_t k = 0; k < selections.size(); ++k) {
        const std::optional<int> bin =
            k == 0 ? std::nullopt : std::optional<int>(static_cast<int>(k) - 1);
        for (const std::string& m : methods) {
          auto it = acc.find({stat, static_cast<int>(k), m});
          if (it == acc.end()) continue;
          const Accumulator& a = it->second;
          const double c = a.count;
          if (m == kSingle) {
            ReportRow row;
            row.level = name;
            row.statistic = stat;
            row.bin = bin;
            row.method = m;
            row.estimate = a.estimate / c;
            row.n = a.n;
            files.report.rows.push_back(row);
          } else if (m.rfind("bias_", 0) == 0) {
            const BiasMethod method = m == kIndep  ? BiasMethod::kTopdownIndep
                                      : m == kTotal ? BiasMethod::kTopdownTotal
                                                    : BiasMethod::kSwapping;
            files.report.rows.push_back(ToReportRow(
                MakeBiasEstimate(a.estimate / c, a.variance / (c * c), method,
                                 a.n),
                name, stat, bin));
          } else {
            const MseMethod method = m == kMseTd   ? MseMethod::kTopdown
                                     : m == kMseSw ? MseMethod::kSwapping
                                                   : MseMethod::kNmfExact;
            files.report.rows.push_back(ToReportRow(
                MakeMseEstimate(a.raw / c, method, a.n), name, stat, bin));
          }
        }
      }
    }

    for (auto& [method, errors] : abs_errors) {
      std::sort(errors.begin(), errors.end());
      double sum = 0.0;
      for (double e : errors) sum += e;
      files.abs_error.rows.push_back(
          {name, method, std::to_string(errors.size()),
           FormatNumber(sum / errors.size()), FormatNumber(Quantile(errors, 0.5)),
           FormatNumber(Quantile(errors, 0.9)),
           FormatNumber(Quantile(errors, 0.99)), FormatNumber(errors.back())});
    }
    for (const auto& [method, data] : share_data) {
      for (const ShareBin& b : BinnedBiasByShare(data.first, data.second)) {
        files.share_bins.rows.push_back(
            {name, method, std::to_string(b.index), FormatNumber(b.lo),
             FormatNumber(b.hi), std::to_string(b.n), FormatOptional(b.mean),
             FormatOptional(b.se)});
      }
    }
  }
  return files;
}

void WriteReport(const fs::path& dir, const ReportFiles& files) {
  {
    std::ofstream out(dir / "report.csv", std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write report.csv");
    files.report.WriteCsv(out);
  }
  {
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write report.json");
    out << files.report.ToJson();
  }
  WriteCsv(dir / "abs_error.csv", files.abs_error);
  WriteCsv(dir / "run_correlation.csv", files.run_correlation);
  WriteCsv(dir / "share_bins.csv", files.share_bins);
}

}  // namespace dasim
