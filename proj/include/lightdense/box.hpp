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

namespace lightdense {

/// Axis-aligned box in continuous pixel coordinates, corners (x1, y1), (x2, y2).
struct Box {
  float x1 = 0.0f;
  float y1 = 0.0f;
  float x2 = 0.0f;
  float y2 = 0.0f;

  float width() const { return x2 - x1; }
  float height() const { return y2 - y1; }
  double area() const {
    return std::max(0.0, static_cast<double>(x2) - x1) * std::max(0.0, static_cast<double>(y2) - y1);
  }
  float center_x() const { return x1 + 0.5f * width(); }
  float center_y() const { return y1 + 0.5f * height(); }

  static Box from_xywh(float x, float y, float w, float h) { return {x, y, x + w, y + h}; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Box regression target relative to a reference box; dimensionless.
struct BoxDelta {
  float dx = 0.0f;
  float dy = 0.0f;
  float dw = 0.0f;
  float dh = 0.0f;
};

/// Upper bound applied to dw, dh before exponentiation.
inline const float kMaxDeltaLogScale = static_cast<float>(std::log(1000.0 / 16.0));

inline double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, static_cast<double>(std::min(a.x2, b.x2)) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, static_cast<double>(std::min(a.y2, b.y2)) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline Box clip_box(const Box& b, float width, float height) {
  return {std::clamp(b.x1, 0.0f, width), std::clamp(b.y1, 0.0f, height),
          std::clamp(b.x2, 0.0f, width), std::clamp(b.y2, 0.0f, height)};
}

inline Box decode_deltas(const Box& anchor, const BoxDelta& d) {
  const float w = anchor.width(), h = anchor.height();
  const float cx = anchor.center_x() + d.dx * w;
  const float cy = anchor.center_y() + d.dy * h;
  const float nw = w * std::exp(std::min(d.dw, kMaxDeltaLogScale));
  const float nh = h * std::exp(std::min(d.dh, kMaxDeltaLogScale));
  return {cx - 0.5f * nw, cy - 0.5f * nh, cx + 0.5f * nw, cy + 0.5f * nh};
}

/// Decode, then clip to [0, width] x [0, height].
inline Box decode_deltas(const Box& anchor, const BoxDelta& d, float width, float height) {
  return clip_box(decode_deltas(anchor, d), width, height);
}

/// Inverse of decode_deltas for boxes with positive extent.
inline BoxDelta encode_deltas(const Box& anchor, const Box& target) {
  const float w = anchor.width(), h = anchor.height();
  return {(target.center_x() - anchor.center_x()) / w, (target.center_y() - anchor.center_y()) / h,
          std::log(target.width() / w), std::log(target.height() / h)};
}

}  // namespace lightdense
