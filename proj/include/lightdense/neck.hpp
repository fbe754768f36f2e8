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

// FPN and BiFPN necks producing P2..P6.

#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "lightdense/backbone.hpp"
#include "lightdense/config.hpp"
#include "lightdense/execute.hpp"
#include "lightdense/fusion.hpp"
#include "lightdense/graph.hpp"

namespace lightdense {

inline constexpr int kPyramidLevels = 5;  // P2..P6

/// Tensor names of P2..P6, index 0 = P2.
using PyramidNames = std::array<std::string, kPyramidLevels>;

struct Pyramid {
  std::array<Tensor, kPyramidLevels> levels;  // index 0 = P2
  std::map<std::string, Tensor> taps;

  const Tensor& p(int level) const { return levels.at(level - 2); }
};

/// Kernel-2, stride-2, ceil-mode max-pool shared by P6 and BiFPN downsampling.
inline PoolSpec downsample_pool() {
  PoolSpec p;
  p.kernel = 2;
  p.stride = 2;
  p.padding = 0;
  p.ceil_mode = true;
  return p;
}

/// Taps registered by a BiFPN over P2..P6: the four projection inputs plus
/// one pre-pointwise tensor per fusion site.
constexpr int bifpn_tap_count(int repeats) { return 4 + 2 * (kPyramidLevels - 1) * repeats; }

inline std::string level_name(int k) { return "p" + std::to_string(k); }

/// Lateral 1x1 -> top-down nearest upsample + add -> 3x3 output conv;
/// P6 = max-pool(P5). Taps on C2..C5.
inline PyramidNames emit_fpn(GraphBuilder& b, const FeatureNames& f, const std::array<int, 4>& in_c,
                             int channels) {
  const std::array<std::string, 4> c{f.c2, f.c3, f.c4, f.c5};
  std::array<std::string, 4> lat, merged;
  for (int i = 0; i < 4; ++i) {
    b.tap(c[i]);
    lat[i] = b.conv("neck.lateral" + std::to_string(i + 2), c[i], pointwise_spec(in_c[i], channels, true));
  }
  merged[3] = lat[3];
  for (int i = 2; i >= 0; --i) {
    const std::string k = std::to_string(i + 2);
    const std::string up = b.resize_like("neck.up" + k, merged[i + 1], lat[i]);
    merged[i] = b.add("neck.merge" + k, lat[i], up);
  }
  PyramidNames p;
  for (int i = 0; i < 4; ++i)
    p[i] = b.conv("neck.output" + std::to_string(i + 2), merged[i], dense_spec(channels, channels, 3, 1, 1, true));
  p[4] = b.max_pool("neck.p6_pool", p[3], downsample_pool());
  return p;
}

namespace detail {

/// weighted sum -> activation -> depthwise 3x3 [tap] -> pointwise 1x1 -> BN.
inline std::string emit_bifpn_fusion(GraphBuilder& b, const std::string& prefix,
                                     std::vector<std::string> ins, const NeckConfig& cfg) {
  std::string t = b.weighted_sum(prefix + ".fuse", std::move(ins), cfg.fusion);
  t = b.activation(prefix + ".act", t, cfg.activation);
  t = b.conv(prefix + ".dw", t, depthwise_spec(cfg.channels, 3, 1));
  b.tap(t);
  return b.conv_bn_act(prefix + ".pw", t, pointwise_spec(cfg.channels, cfg.channels),
                       Activation::kIdentity);
}

}  // namespace detail

/// Input projections (1x1 + BN) of C2..C5, P6 input by pooling, then `repeats`
/// top-down + bottom-up passes.
inline PyramidNames emit_bifpn(GraphBuilder& b, const FeatureNames& f, const std::array<int, 4>& in_c,
                               const NeckConfig& cfg) {
  const std::array<std::string, 4> c{f.c2, f.c3, f.c4, f.c5};
  PyramidNames in;
  for (int i = 0; i < 4; ++i) {
    b.tap(c[i]);
    in[i] = b.conv_bn_act("neck.proj" + std::to_string(i + 2), c[i], pointwise_spec(in_c[i], cfg.channels),
                          Activation::kIdentity);
  }
  in[4] = b.max_pool("neck.p6_pool", in[3], downsample_pool());
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::string pre = "neck.r" + std::to_string(r);
    PyramidNames td, out;
    td[4] = in[4];
    for (int i = 3; i >= 0; --i) {
      const std::string p = pre + ".td" + std::to_string(i + 2);
      const std::string up = b.resize_like(p + ".up", td[i + 1], in[i]);
      td[i] = detail::emit_bifpn_fusion(b, p, {in[i], up}, cfg);
    }
    out[0] = td[0];
    for (int i = 1; i < kPyramidLevels; ++i) {
      const std::string p = pre + ".out" + std::to_string(i + 2);
      const std::string down = b.max_pool(p + ".down", out[i - 1], downsample_pool());
      std::vector<std::string> ins{in[i]};
      if (i < kPyramidLevels - 1) ins.push_back(td[i]);
      ins.push_back(down);
      out[i] = detail::emit_bifpn_fusion(b, p, std::move(ins), cfg);
    }
    in = out;
  }
  return in;
}

/// Emits the configured neck and renames its outputs to "p2".."p6".
inline PyramidNames emit_neck(GraphBuilder& b, const FeatureNames& f, const std::array<int, 4>& in_c,
                              const NeckConfig& cfg) {
  PyramidNames p = cfg.type == NeckType::kFpn ? emit_fpn(b, f, in_c, cfg.channels) : emit_bifpn(b, f, in_c, cfg);
  for (int i = 0; i < kPyramidLevels; ++i) {
    b.graph().rename_tensor(p[i], level_name(i + 2));
    p[i] = level_name(i + 2);
  }
  return p;
}

/// Standalone neck graph: inputs "c2".."c5", outputs "p2".."p6".
inline ModelGraph build_neck_graph(const NeckConfig& cfg, const std::array<int, 4>& in_c) {
  ModelGraph g;
  GraphBuilder b(g);
  FeatureNames f{b.input("c2"), b.input("c3"), b.input("c4"), b.input("c5")};
  const auto p = emit_neck(b, f, in_c, cfg);
  for (const auto& n : p) b.output(n);
  g.validate();
  return g;
}

/// Runs a graph from build_neck_graph (FPN or BiFPN).
inline Pyramid neck_forward(const FeatureSet& f, const ModelGraph& g) {
  const std::array<const Tensor*, 4> c{&f.c2, &f.c3, &f.c4, &f.c5};
  for (int i = 0; i < 3; ++i) {
    if (c[i]->h() != 2 * c[i + 1]->h() || c[i]->w() != 2 * c[i + 1]->w() || c[i]->n() != c[i + 1]->n())
      throw InputError("feature levels are not spatially consistent: C" + std::to_string(i + 2) + " " +
                       to_string(c[i]->shape()) + " vs C" + std::to_string(i + 3) + " " +
                       to_string(c[i + 1]->shape()));
  }
  ValueMap in;
  for (int i = 0; i < 4; ++i) in.emplace("c" + std::to_string(i + 2), *c[i]);
  auto r = execute(g, std::move(in), {{"p2", "p3", "p4", "p5", "p6"}, {}});
  Pyramid p;
  for (int i = 0; i < kPyramidLevels; ++i) p.levels[i] = as_float(r.values.at(level_name(i + 2)));
  p.taps = std::move(r.taps);
  return p;
}

inline Pyramid fpn_forward(const FeatureSet& f, const ModelGraph& g) { return neck_forward(f, g); }
inline Pyramid bifpn_forward(const FeatureSet& f, const ModelGraph& g) { return neck_forward(f, g); }

}  // namespace lightdense
