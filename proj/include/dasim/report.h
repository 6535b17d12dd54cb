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

#ifndef DASIM_REPORT_H_
#define DASIM_REPORT_H_

#include <filesystem>
#include <string>
#include <vector>

#include "dasim/csv.h"
#include "dasim/estimators.h"
#include "dasim/geo.h"

namespace dasim {

struct ReportOptions {
  std::vector<GeoLevel> levels;         // empty: every level simulated
  std::vector<std::string> statistics;  // empty: every statistic
  // Method names as in report.csv; empty: every method the artifacts allow.
  // Naming an independent-run method for single-run artifacts raises
  // Error(kUsageError).
  std::vector<std::string> methods;
  int bins = 10;
};

const std::vector<std::string>& AllReportMethods();

// Estimates averaged over replicates: point estimates and raw MSE are
// means, bias variances are mean variance / R.
struct ReportFiles {
  ErrorReport report;
  CsvTable abs_error;        // level,method,n,mean,p50,p90,p99,max
  CsvTable run_correlation;  // level,statistic,replicate,n,correlation
  CsvTable share_bins;       // level,method,bin,lo,hi,n,mean,se
};

// Reads a simulate directory. Throws Error(kIoError) or Error(kSchemaError)
// for missing or malformed artifacts.
ReportFiles BuildReport(const std::filesystem::path& dir,
                        const ReportOptions& options);

// report.csv, report.json, abs_error.csv, run_correlation.csv,
// share_bins.csv.
void WriteReport(const std::filesystem::path& dir, const ReportFiles& files);

}  // namespace dasim

#endif  // DASIM_REPORT_H_
