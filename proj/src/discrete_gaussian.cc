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

#include "dasim/discrete_gaussian.h"

#include <cmath>
#include <random>

#include "dasim/error.h"

namespace dasim {

int64_t SampleDiscreteLaplace(double scale, Rng& rng) {
  // Difference of two iid geometrics with success probability 1 - e^{-1/t}.
  std::geometric_distribution<int64_t> geometric(1.0 - std::exp(-1.0 / scale));
  return geometric(rng) - geometric(rng);
}

int64_t SampleDiscreteGaussian(double variance, Rng& rng) {
  if (!(variance >= 0.0) || !std::isfinite(variance)) {
    throw Error(ErrorCode::kParameterError,
                "discrete Gaussian variance must be finite and >= 0");
  }
  if (variance == 0.0) return 0;
  const double t = std::floor(std::sqrt(variance)) + 1.0;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  while (true) {
    const int64_t y = SampleDiscreteLaplace(t, rng);
    const double d = std::abs(static_cast<double>(y)) - variance / t;
    if (uniform(rng) < std::exp(-d * d / (2.0 * variance))) return y;
  }
}

}  // namespace dasim
