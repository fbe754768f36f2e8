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

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lightdense/box.hpp"
#include "lightdense/errors.hpp"
#include "lightdense/tensor.hpp"

namespace lightdense {

struct RoiAlignParams {
  int output_size = 7;
  int sampling_ratio = 2;
  float spatial_scale = 1.0f;
};

namespace detail {

struct BilinearTap {
  int i00, i01, i10, i11;
  float w00, w01, w10, w11;
};

// Same clamp-to-border rule as bilinear_sample.
inline BilinearTap bilinear_tap(float y, float x, int h, int w) {
  y = std::clamp(y, 0.0f, static_cast<float>(h - 1));
  x = std::clamp(x, 0.0f, static_cast<float>(w - 1));
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const float ly = y - static_cast<float>(y0), lx = x - static_cast<float>(x0);
  const float hy = 1.0f - ly, hx = 1.0f - lx;
  return {y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1, hy * hx, hy * lx, ly * hx, ly * lx};
}

}  // namespace detail

/// Pools `box` (image coordinates) from item `batch_index` of `feature` into
/// (1, c, S, S). Feature coordinates are image coordinates times spatial_scale
/// with the half-pixel offset; each cell averages sampling_ratio^2 bilinear
/// samples at regular sub-cell centers. RoI extents below one feature cell are
/// clamped to one cell.
inline Tensor roi_align(const Tensor& feature, int batch_index, const Box& box,
                        const RoiAlignParams& p) {
  if (p.output_size <= 0 || p.sampling_ratio <= 0)
    throw ConfigError("roi_align output size and sampling ratio must be positive");
  if (batch_index < 0 || batch_index >= feature.n())
    throw InputError("roi_align batch index out of range");
  if (feature.h() <= 0 || feature.w() <= 0) throw InputError("roi_align on empty feature map");
  const int S = p.output_size, sr = p.sampling_ratio;
  const float start_x = box.x1 * p.spatial_scale - 0.5f;
  const float start_y = box.y1 * p.spatial_scale - 0.5f;
  const float roi_w = std::max((box.x2 - box.x1) * p.spatial_scale, 1.0f);
  const float roi_h = std::max((box.y2 - box.y1) * p.spatial_scale, 1.0f);
  const float bin_w = roi_w / static_cast<float>(S), bin_h = roi_h / static_cast<float>(S);

  std::vector<detail::BilinearTap> taps;
  taps.reserve(static_cast<std::size_t>(S) * S * sr * sr);
  for (int ph = 0; ph < S; ++ph) {
    for (int pw = 0; pw < S; ++pw) {
      for (int iy = 0; iy < sr; ++iy) {
        const float y = start_y + static_cast<float>(ph) * bin_h +
                        (static_cast<float>(iy) + 0.5f) * bin_h / static_cast<float>(sr);
        for (int ix = 0; ix < sr; ++ix) {
          const float x = start_x + static_cast<float>(pw) * bin_w +
                          (static_cast<float>(ix) + 0.5f) * bin_w / static_cast<float>(sr);
          taps.push_back(detail::bilinear_tap(y, x, feature.h(), feature.w()));
        }
      }
    }
  }
  const float inv_count = 1.0f / static_cast<float>(sr * sr);
  Tensor out({1, feature.c(), S, S});
  for (int c = 0; c < feature.c(); ++c) {
    const float* src = feature.plane(batch_index, c);
    float* dst = out.plane(0, c);
    std::size_t t = 0;
    for (int cell = 0; cell < S * S; ++cell) {
      float sum = 0.0f;
      for (int k = 0; k < sr * sr; ++k, ++t) {
        const auto& b = taps[t];
        sum += b.w00 * src[b.i00] + b.w01 * src[b.i01] + b.w10 * src[b.i10] + b.w11 * src[b.i11];
      }
      dst[cell] = sum * inv_count;
    }
  }
  return out;
}

/// Pools every box from batch item 0; result (K, c, S, S).
inline Tensor roi_align(const Tensor& feature, std::span<const Box> boxes, const RoiAlignParams& p) {
  Tensor out({static_cast<int>(boxes.size()), feature.c(), p.output_size, p.output_size});
  const std::size_t per = static_cast<std::size_t>(feature.c()) * p.output_size * p.output_size;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const Tensor one = roi_align(feature, 0, boxes[k], p);
    std::copy_n(one.raw(), per, out.raw() + k * per);
  }
  return out;
}

/// Pyramid level for box-head pooling: clamp(floor(4 + log2(sqrt(area) / 224)), lo, hi).
inline int assign_level(const Box& box, int min_level = 2, int max_level = 5) {
  const double side = std::sqrt(box.area());
  if (side <= 0.0) return min_level;
  const int k = static_cast<int>(std::floor(4.0 + std::log2(side / 224.0)));
  return std::clamp(k, min_level, max_level);
}

/// Pools each box from the level chosen by assign_level. `features[i]` is
/// level `min_level + i` with stride 2^level.
inline Tensor multilevel_roi_align(std::span<const Tensor* const> features, int min_level,
                                   std::span<const Box> boxes, int output_size, int sampling_ratio) {
  if (features.empty()) throw ConfigError("multilevel_roi_align needs at least one level");
  const int max_level = min_level + static_cast<int>(features.size()) - 1;
  const int c = features.front()->c();
  for (const Tensor* f : features) {
    if (f->c() != c) throw ConfigError("multilevel_roi_align levels differ in channel count");
  }
  Tensor out({static_cast<int>(boxes.size()), c, output_size, output_size});
  const std::size_t per = static_cast<std::size_t>(c) * output_size * output_size;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const int level = assign_level(boxes[k], min_level, max_level);
    RoiAlignParams p{output_size, sampling_ratio, 1.0f / static_cast<float>(1 << level)};
    const Tensor one = roi_align(*features[level - min_level], 0, boxes[k], p);
    std::copy_n(one.raw(), per, out.raw() + k * per);
  }
  return out;
}

}  // namespace lightdense
