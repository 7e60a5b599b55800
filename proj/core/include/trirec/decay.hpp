// Copyright 2026 The trirec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "trirec/core_model.hpp"

namespace trirec {

/// Position-bias exposure v(k) = 1 / log2(k + 2) for a 1-based position k.
/// Shared by the exposure state transition, the participation policy and
/// the exposure-weighted metrics.
inline double exposure_decay(std::size_t k) {
  if (k < 1) throw ValidationError("exposure_decay: position must be >= 1");
  return 1.0 / std::log2(static_cast<double>(k) + 2.0);
}

/// Σ_{k=1..n} v(k): the exposure mass a length-n list hands out.
inline double list_exposure_mass(std::size_t n) {
  double sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) sum += exposure_decay(k);
  return sum;
}

}  // namespace trirec
