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

// Inverted-residual backbone emitting C2..C5.

#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>

#include "lightdense/config.hpp"
#include "lightdense/errors.hpp"
#include "lightdense/execute.hpp"
#include "lightdense/graph.hpp"

namespace lightdense {

/// Tensor names of the backbone features.
struct FeatureNames {
  std::string c2, c3, c4, c5;
};

struct FeatureSet {
  Tensor c2, c3, c4, c5;
};

inline int se_reduced_channels(int channels, double ratio) {
  return std::max(1, static_cast<int>(std::lround(channels * ratio)));
}

inline int expanded_channels(int in_channels, double expansion) {
  return std::max(1, static_cast<int>(std::lround(in_channels * expansion)));
}

inline ConvSpec pointwise_spec(int in_c, int out_c, bool bias = false) {
  ConvSpec s;
  s.in_channels = in_c;
  s.out_channels = out_c;
  s.has_bias = bias;
  return s;
}

inline ConvSpec depthwise_spec(int channels, int kernel, int stride, int dilation = 1) {
  ConvSpec s;
  s.in_channels = s.out_channels = s.groups = channels;
  s.kernel_h = s.kernel_w = kernel;
  s.stride_h = s.stride_w = stride;
  s.dilation_h = s.dilation_w = dilation;
  s.pad_h = s.pad_w = dilation * (kernel - 1) / 2;
  s.has_bias = false;
  return s;
}

inline ConvSpec dense_spec(int in_c, int out_c, int kernel, int stride = 1, int dilation = 1,
                           bool bias = false) {
  ConvSpec s;
  s.in_channels = in_c;
  s.out_channels = out_c;
  s.kernel_h = s.kernel_w = kernel;
  s.stride_h = s.stride_w = stride;
  s.dilation_h = s.dilation_w = dilation;
  s.pad_h = s.pad_w = dilation * (kernel - 1) / 2;
  s.has_bias = bias;
  return s;
}

/// x * h_sigmoid(expand(relu(reduce(gap(x))))).
inline std::string emit_se_block(GraphBuilder& b, const std::string& prefix, const std::string& in,
                                 int channels, double ratio) {
  const int reduced = se_reduced_channels(channels, ratio);
  std::string t = b.global_avg_pool(prefix + ".pool", in);
  t = b.conv(prefix + ".reduce", t, pointwise_spec(channels, reduced, true));
  t = b.activation(prefix + ".reduce_act", t, Activation::kRelu);
  t = b.conv(prefix + ".expand", t, pointwise_spec(reduced, channels, true));
  t = b.activation(prefix + ".gate", t, Activation::kHardSigmoid);
  return b.channel_scale(prefix + ".scale", in, t);
}

/// Expand 1x1 (skipped at expansion 1) -> depthwise kxk -> optional SE ->
/// linear project 1x1 -> residual add when stride 1 and channels match.
inline std::string emit_inverted_residual(GraphBuilder& b, const std::string& prefix,
                                          const std::string& in, int in_c, const StageConfig& s,
                                          int stride) {
  const int hidden = expanded_channels(in_c, s.expansion);
  std::string t = in;
  if (hidden != in_c || s.expansion != 1.0)
    t = b.conv_bn_act(prefix + ".expand", t, pointwise_spec(in_c, hidden), s.activation);
  t = b.conv_bn_act(prefix + ".dw", t, depthwise_spec(hidden, s.kernel, stride), s.activation);
  if (s.se_ratio > 0) t = emit_se_block(b, prefix + ".se", t, hidden, s.se_ratio);
  t = b.conv_bn_act(prefix + ".project", t, pointwise_spec(hidden, s.out_channels), Activation::kIdentity);
  if (stride == 1 && in_c == s.out_channels) t = b.add(prefix + ".add", t, in);
  return t;
}

/// Stem 3x3/2 conv + BN + act, then the stages. C_k is the output of the last
/// block at stride 2^k.
inline FeatureNames emit_backbone(GraphBuilder& b, const std::string& input, const BackboneConfig& cfg,
                                  int in_channels = 3) {
  std::string t = b.conv_bn_act("backbone.stem", input,
                                dense_spec(in_channels, cfg.stem_channels, 3, 2), cfg.stem_activation);
  int c = cfg.stem_channels;
  int stride = 2;
  std::map<int, std::string> last_at;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& st = cfg.stages[i];
    for (int r = 0; r < st.repeats; ++r) {
      const int s = r == 0 ? st.stride : 1;
      t = emit_inverted_residual(b, "backbone.s" + std::to_string(i) + ".b" + std::to_string(r), t, c,
                                 st, s);
      c = st.out_channels;
      stride *= s;
      last_at[stride] = t;
    }
  }
  for (int k : {4, 8, 16, 32})
    if (!last_at.count(k)) throw ConfigError("backbone has no block at stride " + std::to_string(k));
  return {last_at[4], last_at[8], last_at[16], last_at[32]};
}

/// Channel counts of C2..C5.
inline std::array<int, 4> feature_channels(const BackboneConfig& cfg) {
  std::map<int, int> ch;
  int stride = 2;
  for (const auto& st : cfg.stages) {
    stride *= st.stride;
    ch[stride] = st.out_channels;
  }
  return {ch[4], ch[8], ch[16], ch[32]};
}

/// Standalone backbone graph: input "image", outputs "c2".."c5".
inline ModelGraph build_backbone_graph(const BackboneConfig& cfg, int in_channels = 3) {
  ModelGraph g;
  GraphBuilder b(g);
  const auto f = emit_backbone(b, b.input("image"), cfg, in_channels);
  g.rename_tensor(f.c2, "c2");
  g.rename_tensor(f.c3, "c3");
  g.rename_tensor(f.c4, "c4");
  g.rename_tensor(f.c5, "c5");
  for (const char* n : {"c2", "c3", "c4", "c5"}) b.output(n);
  g.validate();
  return g;
}

inline void check_divisible(const Tensor& x, int by) {
  if (x.h() % by != 0 || x.w() % by != 0)
    throw InputError("input spatial size " + std::to_string(x.h()) + "x" + std::to_string(x.w()) +
                     " is not divisible by " + std::to_string(by));
}

/// Runs a graph from build_backbone_graph.
inline FeatureSet backbone_forward(const Tensor& x, const ModelGraph& g) {
  check_divisible(x, 32);
  auto out = execute_float(g, "image", x, {"c2", "c3", "c4", "c5"});
  return {out.at("c2"), out.at("c3"), out.at("c4"), out.at("c5")};
}

}  // namespace lightdense
