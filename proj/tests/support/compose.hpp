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

// Hand composition of kernel calls from a graph's stored parameters, for
// checking graph execution against direct kernel sequences.

#pragma once

#include <string>
#include <vector>

#include "lightdense/lightdense.hpp"
#include "support/oracles.hpp"

namespace compose {

using lightdense::ModelGraph;
using lightdense::Tensor;

inline std::vector<float> param(const ModelGraph& g, const std::string& node, const char* key) {
  const auto& n = g.params_node(g.node(node));
  auto it = n.params.find(key);
  return it == n.params.end() ? std::vector<float>{} : oracle::values(it->second);
}

inline Tensor conv(const ModelGraph& g, const std::string& node, const Tensor& x) {
  const auto& n = g.node(node);
  const auto& owner = g.params_node(n);
  const auto b = param(g, node, "bias");
  if (n.attrs.conv.is_depthwise()) return lightdense::depthwise_conv2d(x, owner.params.at("weight"), b, n.attrs.conv);
  return lightdense::conv2d(x, owner.params.at("weight"), b, n.attrs.conv);
}

inline Tensor bn(const ModelGraph& g, const std::string& node, const Tensor& x) {
  return lightdense::batch_norm(x, param(g, node, "gamma"), param(g, node, "beta"), param(g, node, "running_mean"),
                                param(g, node, "running_var"), g.node(node).attrs.eps);
}

inline Tensor linear(const ModelGraph& g, const std::string& node, const Tensor& x) {
  const auto& owner = g.params_node(g.node(node));
  return lightdense::linear(x, owner.params.at("weight"), param(g, node, "bias"));
}

/// "<p>.conv" -> "<p>.bn" -> activation.
inline Tensor conv_bn_act(const ModelGraph& g, const std::string& p, const Tensor& x, lightdense::Activation a) {
  return lightdense::activate(bn(g, p + ".bn", conv(g, p + ".conv", x)), a);
}

/// Sets every batch norm to the identity transform (eps aside).
inline void neutral_batch_norms(ModelGraph& g) {
  for (auto& n : g.nodes) {
    if (n.kind != lightdense::OpKind::kBatchNorm) continue;
    const int c = n.params.at("gamma").c();
    n.params["gamma"] = Tensor({1, c, 1, 1}, 1.0f);
    n.params["beta"] = Tensor({1, c, 1, 1}, 0.0f);
    n.params["running_mean"] = Tensor({1, c, 1, 1}, 0.0f);
    n.params["running_var"] = Tensor({1, c, 1, 1}, 1.0f);
  }
}

inline void fill_param(ModelGraph& g, const std::string& node, const char* key, float v) {
  auto& t = g.node(node).params.at(key);
  t = Tensor(t.shape(), v);
}

}  // namespace compose
