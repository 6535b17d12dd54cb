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

#ifndef DASIM_ACCEPTANCE_H_
#define DASIM_ACCEPTANCE_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace dasim {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::vector<int> criteria;  // empty: 1..9
  uint64_t seed = 20261017;
};

inline constexpr int kNumCriteria = 9;

// Throws Error(kUsageError) for an id outside 1..9.
CriterionResult RunCriterion(int id, const AcceptanceOptions& options);

// Runs the selected criteria in order, printing each line to `log` (if
// non-null) as soon as it finishes.
std::vector<CriterionResult> RunAcceptance(const AcceptanceOptions& options,
                                           std::ostream* log);

// "PASS criterion 3: <title> [12.3 s] <detail>"
std::string FormatResult(const CriterionResult& result);

}  // namespace dasim

#endif  // DASIM_ACCEPTANCE_H_
