// Copyright 2026 The LightDense Authors. All Rights Reserved.
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

// BiFPN fusion-site weighting.

#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "lightdense/errors.hpp"
#include "lightdense/graph.hpp"
#include "lightdense/kernels.hpp"

namespace lightdense {

/// Per-edge weights of a fusion site. Fast-normalized:
/// w_i = relu(l_i) / (sum_j relu(l_j) + eps). Sum: w_i = 1.
inline std::vector<float> fusion_weights(std::span<const float> lambdas, FusionKind kind,
                                         float eps = 1e-4f) {
  if (lambdas.empty()) throw ConfigError("fusion site with no inputs");
  std::vector<float> w(lambdas.size(), 1.0f);
  if (kind == FusionKind::kSum) return w;
  float total = 0.0f;
  for (float l : lambdas) total += std::max(l, 0.0f);
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    w[i] = std::max(lambdas[i], 0.0f) / (total + eps);
  return w;
}

/// sum_i w_i * x_i with w from fusion_weights.
inline Tensor normalized_fusion(std::span<const Tensor* const> inputs, std::span<const float> lambdas,
                                FusionKind kind = FusionKind::kFastNormalized, float eps = 1e-4f) {
  if (inputs.empty()) throw ConfigError("normalized_fusion needs at least one input");
  if (inputs.size() != lambdas.size())
    throw ConfigError("normalized_fusion: one lambda per input required");
  const auto w = fusion_weights(lambdas, kind, eps);
  return scaled_sum(inputs, w);
}

}  // namespace lightdense
