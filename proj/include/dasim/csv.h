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

#ifndef DASIM_CSV_H_
#define DASIM_CSV_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dasim {

// Shortest decimal text that reads back to the same double; integral values
// print without a fraction.
std::string FormatNumber(double v);
std::string FormatOptional(const std::optional<double>& v);

// Plain comma-separated fields; no quoting is supported or produced.
std::vector<std::string> SplitCsvLine(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column position by name; throws Error(kSchemaError) when absent.
  size_t Column(std::string_view name) const;
};

// Throws Error(kIoError) if the file cannot be read and Error(kSchemaError)
// when a row has the wrong number of fields or the header differs from
// `expected_header` (if given).
CsvTable ReadCsv(const std::filesystem::path& path,
                 const std::vector<std::string>& expected_header = {});

// Throws Error(kIoError).
void WriteCsv(const std::filesystem::path& path, const CsvTable& table);

double ParseDouble(std::string_view text);
int64_t ParseInt(std::string_view text);

}  // namespace dasim

#endif  // DASIM_CSV_H_
