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

#include "dasim/error.h"

#include <string>

namespace dasim {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedGeocode:
      return "MalformedGeocode";
    case ErrorCode::kInconsistentGeocode:
      return "InconsistentGeocode";
    case ErrorCode::kEmptyTarget:
      return "EmptyTarget";
    case ErrorCode::kSchemaError:
      return "SchemaError";
    case ErrorCode::kParameterError:
      return "ParameterError";
    case ErrorCode::kEmptyInput:
      return "EmptyInput";
    case ErrorCode::kCoverageError:
      return "CoverageError";
    case ErrorCode::kInfeasibleConstraints:
      return "InfeasibleConstraints";
    case ErrorCode::kSeedError:
      return "SeedError";
    case ErrorCode::kUsageError:
      return "UsageError";
    case ErrorCode::kConfigError:
      return "ConfigError";
    case ErrorCode::kIoError:
      return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

}  // namespace dasim
