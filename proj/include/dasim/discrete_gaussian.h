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

#ifndef DASIM_DISCRETE_GAUSSIAN_H_
#define DASIM_DISCRETE_GAUSSIAN_H_

#include <cstdint>

#include "dasim/rng.h"

namespace dasim {

// Draws from the discrete Gaussian on the integers, pmf proportional to
// exp(-n^2 / (2 variance)). Exact rejection sampling from a discrete Laplace
// proposal with scale floor(sigma) + 1. Variance 0 returns 0. Throws
// Error(kParameterError) for negative or non-finite variance.
int64_t SampleDiscreteGaussian(double variance, Rng& rng);

// Two-sided geometric: pmf proportional to exp(-|n| / scale).
int64_t SampleDiscreteLaplace(double scale, Rng& rng);

}  // namespace dasim

#endif  // DASIM_DISCRETE_GAUSSIAN_H_
