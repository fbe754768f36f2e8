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

// Random operands and synthetic instances shared by the unit and acceptance
// tests.

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "support/oracles.hpp"

namespace fixtures {

inline lightdense::QuantizedTensor random_activation(const lightdense::Shape& s, oracle::Rng& rng) {
  lightdense::QuantizedTensor q;
  q.shape = s;
  q.qparams = lightdense::QuantParams::per_tensor(static_cast<float>(rng.uniform(0.005, 0.1)), rng.randint(0, 255), lightdense::QDType::kU8);
  q.data.resize(s.count());
  for (auto& v : q.data) v = static_cast<std::int16_t>(rng.randint(0, 255));
  return q;
}

inline lightdense::QuantizedTensor random_weight(const lightdense::Shape& s, oracle::Rng& rng) {
  lightdense::QuantizedTensor q;
  q.shape = s;
  q.qparams.dtype = lightdense::QDType::kI8;
  q.qparams.per_channel = true;
  q.qparams.zero_point.assign(s.n, 0);
  q.qparams.scale.clear();
  for (int o = 0; o < s.n; ++o) q.qparams.scale.push_back(static_cast<float>(rng.uniform(0.001, 0.05)));
  q.data.resize(s.count());
  for (auto& v : q.data) v = static_cast<std::int16_t>(rng.randint(-128, 127));
  return q;
}

inline lightdense::ConvSpec random_spec(oracle::Rng& rng) {
  lightdense::ConvSpec s;
  const int g = rng.coin(0.2) ? rng.randint(2, 3) : 1;
  s.groups = g;
  s.in_channels = g * rng.randint(1, 5);
  s.out_channels = g * rng.randint(1, 5);
  if (rng.coin(0.25)) s.in_channels = s.out_channels = s.groups = rng.randint(1, 8);
  s.kernel_h = rng.randint(1, 3);
  s.kernel_w = rng.randint(1, 3);
  s.stride_h = rng.randint(1, 2);
  s.stride_w = rng.randint(1, 2);
  s.dilation_h = rng.randint(1, 2);
  s.dilation_w = rng.randint(1, 2);
  s.pad_h = rng.randint(0, 2);
  s.pad_w = rng.randint(0, 2);
  s.has_bias = rng.coin();
  return s;
}

inline std::vector<std::int32_t> random_bias(const lightdense::ConvSpec& s, oracle::Rng& rng) {
  std::vector<std::int32_t> b;
  if (!s.has_bias) return b;
  for (int o = 0; o < s.out_channels; ++o) b.push_back(rng.randint(-20000, 20000));
  return b;
}

inline lightdense::Shape input_shape(const lightdense::ConvSpec& s, oracle::Rng& rng) {
  const int h = s.dilation_h * (s.kernel_h - 1) + 1 + rng.randint(0, 8);
  const int w = s.dilation_w * (s.kernel_w - 1) + 1 + rng.randint(0, 8);
  return {rng.randint(1, 2), s.in_channels, h, w};
}

inline lightdense::ModelGraph seeded_model_b(std::uint64_t seed) {
  lightdense::ModelGraph g = lightdense::build_graph(lightdense::default_model_b());
  lightdense::initialize_weights(g, seed);
  return g;
}

inline std::vector<std::string> pyramid_outputs() {
  std::vector<std::string> outs = lightdense::rpn_output_names();
  for (int k = 2; k <= 6; ++k) outs.push_back(lightdense::level_name(k));
  return outs;
}

inline lightdense::Box random_box(oracle::Rng& rng, double extent = 200.0, double min_side = 1.0,
                                  double max_side = 80.0) {
  const float x = static_cast<float>(rng.uniform(0, extent)), y = static_cast<float>(rng.uniform(0, extent));
  const float w = static_cast<float>(rng.uniform(min_side, max_side));
  const float h = static_cast<float>(rng.uniform(min_side, max_side));
  return lightdense::Box::from_xywh(x, y, w, h);
}

// Scores drawn from a small set so that ties are common.
inline std::vector<float> tied_scores(oracle::Rng& rng, std::size_t n) {
  std::vector<float> s(n);
  for (auto& v : s) v = static_cast<float>(rng.randint(0, 9)) / 10.0f;
  return s;
}

// Points at distinct grid-cell centers of `box`.
inline lightdense::EvalInstance random_instance(oracle::Rng& rng, std::int64_t image, const lightdense::Box& box,
                                                int points) {
  lightdense::EvalInstance inst;
  inst.image_id = image;
  inst.box = box;
  std::set<int> used;
  while (static_cast<int>(inst.points.size()) < points) {
    const int gx = rng.randint(0, 31), gy = rng.randint(0, 31);
    if (!used.insert(gy * 32 + gx).second) continue;
    const float x = box.x1 + (gx + 0.5f) * box.width() / 32.0f, y = box.y1 + (gy + 0.5f) * box.height() / 32.0f;
    inst.points.push_back({x, y, {rng.randint(1, 24), static_cast<float>(rng.uniform(0, 1)),
                                  static_cast<float>(rng.uniform(0, 1))}});
  }
  return inst;
}

// Ground truth rasterized into a 32 x 32 prediction; other cells background.
inline lightdense::DensePoseResult rasterize(const lightdense::EvalInstance& gt) {
  lightdense::DensePoseResult r;
  r.box = gt.box;
  r.size = 32;
  r.parts.assign(32 * 32, 0);
  r.u.assign(32 * 32, 0.0f);
  r.v.assign(32 * 32, 0.0f);
  for (const auto& p : gt.points) {
    const int gx = static_cast<int>((p.x - gt.box.x1) / gt.box.width() * 32);
    const int gy = static_cast<int>((p.y - gt.box.y1) / gt.box.height() * 32);
    r.parts[gy * 32 + gx] = static_cast<std::uint8_t>(p.t.c);
    r.u[gy * 32 + gx] = p.t.u;
    r.v[gy * 32 + gx] = p.t.v;
  }
  return r;
}

}  // namespace fixtures
