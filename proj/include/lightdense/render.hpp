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

// Qualitative overlay of DensePose results.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lightdense/detection.hpp"
#include "lightdense/image.hpp"

namespace lightdense {

using Rgb = std::array<std::uint8_t, 3>;

/// Fixed color per part index: hues spaced evenly over the 24 charts.
inline Rgb part_color(int part) {
  if (part <= 0) return {0, 0, 0};
  const double h = std::fmod((part - 1) * 15.0, 360.0) / 60.0;
  const double x = 1.0 - std::fabs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = 1, g = x; break;
    case 1: r = x, g = 1; break;
    case 2: g = 1, b = x; break;
    case 3: g = x, b = 1; break;
    case 4: r = x, b = 1; break;
    default: r = 1, b = x; break;
  }
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
  return {q(r), q(g), q(b)};
}

namespace detail {

inline std::uint8_t blend(std::uint8_t a, double b, double alpha) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(a * (1.0 - alpha) + b * alpha), 0L, 255L));
}

inline void draw_rect(Image& img, const Box& b, const Rgb& color) {
  const int x1 = std::clamp(static_cast<int>(std::floor(b.x1)), 0, img.width - 1);
  const int y1 = std::clamp(static_cast<int>(std::floor(b.y1)), 0, img.height - 1);
  const int x2 = std::clamp(static_cast<int>(std::ceil(b.x2)) - 1, 0, img.width - 1);
  const int y2 = std::clamp(static_cast<int>(std::ceil(b.y2)) - 1, 0, img.height - 1);
  auto put = [&](int x, int y) { std::copy(color.begin(), color.end(), img.pixel(x, y)); };
  for (int x = x1; x <= x2; ++x) {
    put(x, y1);
    put(x, y2);
  }
  for (int y = y1; y <= y2; ++y) {
    put(x1, y);
    put(x2, y);
  }
}

}  // namespace detail

/// Part-colored fill (U modulates red, V modulates green), solid part
/// contours, and box outlines. Lower-scored results are drawn first.
inline Image render_overlay(const Image& image, const std::vector<PersonResult>& results) {
  Image out = image;
  std::vector<const PersonResult*> order;
  for (const auto& r : results) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](auto* a, auto* b) { return a->detection.score < b->detection.score; });
  for (const auto* r : order) {
    const DensePoseResult& dp = r->densepose;
    const Box& b = dp.box;
    const int s = dp.size;
    const float bw = b.x2 - b.x1, bh = b.y2 - b.y1;
    if (!(bw > 0 && bh > 0) || dp.parts.size() != static_cast<std::size_t>(s) * s) continue;
    auto cell_at = [&](int x, int y) -> int {
      const float fx = (x + 0.5f - b.x1) / bw * s, fy = (y + 0.5f - b.y1) / bh * s;
      if (fx < 0 || fy < 0 || fx >= s || fy >= s) return -1;
      return static_cast<int>(fy) * s + static_cast<int>(fx);
    };
    const int x0 = std::max(0, static_cast<int>(std::floor(b.x1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.y1)));
    const int x1 = std::min(image.width, static_cast<int>(std::ceil(b.x2)));
    const int y1 = std::min(image.height, static_cast<int>(std::ceil(b.y2)));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const int i = cell_at(x, y);
        if (i < 0 || dp.parts[i] == 0) continue;
        const int part = dp.parts[i];
        const Rgb c = part_color(part);
        std::uint8_t* px = out.pixel(x, y);
        const int right = x + 1 < x1 ? cell_at(x + 1, y) : -1;
        const int down = y + 1 < y1 ? cell_at(x, y + 1) : -1;
        const bool edge = (right >= 0 && dp.parts[right] != part) || (down >= 0 && dp.parts[down] != part);
        if (edge) {
          std::copy(c.begin(), c.end(), px);
          continue;
        }
        px[0] = detail::blend(px[0], c[0] * (0.5 + 0.5 * dp.u[i]), 0.6);
        px[1] = detail::blend(px[1], c[1] * (0.5 + 0.5 * dp.v[i]), 0.6);
        px[2] = detail::blend(px[2], c[2], 0.6);
      }
    }
    detail::draw_rect(out, b, {255, 255, 0});
  }
  return out;
}

}  // namespace lightdense
