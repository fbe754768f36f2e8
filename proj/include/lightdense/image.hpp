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

// Binary PPM I/O and network input preparation.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "lightdense/errors.hpp"
#include "lightdense/tensor.hpp"

namespace lightdense {

/// 8-bit RGB, interleaved, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

class PpmHeaderReader {
 public:
  explicit PpmHeaderReader(std::span<const std::uint8_t> b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000) throw FormatError(std::string("PPM ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PPM header: expected ") + what, start);
    return static_cast<int>(v);
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses binary PPM ("P6", maxval 255).
inline Image read_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError("not a binary PPM (magic P6)", 0);
  detail::PpmHeaderReader r(bytes);
  r.advance(2);
  const std::size_t after_magic = r.pos();
  if (after_magic >= bytes.size() || !(std::isspace(bytes[after_magic]) || bytes[after_magic] == '#'))
    throw FormatError("PPM header: expected whitespace after magic", after_magic);
  r.skip_space_and_comments();
  const std::size_t dims_at = r.pos();
  const int w = r.number("width");
  const int h = r.number("height");
  r.skip_space_and_comments();
  const std::size_t maxval_at = r.pos();
  const int maxval = r.number("maxval");
  if (w <= 0 || h <= 0) throw FormatError("PPM dimensions must be positive", dims_at);
  if (maxval != 255) throw FormatError("PPM maxval must be 255, got " + std::to_string(maxval), maxval_at);
  if (r.pos() >= bytes.size() || !std::isspace(bytes[r.pos()]))
    throw FormatError("PPM header: expected a single whitespace before pixel data", r.pos());
  r.advance(1);
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - r.pos() < need)
    throw FormatError("PPM pixel data truncated: need " + std::to_string(need) + " bytes, have " +
                          std::to_string(bytes.size() - r.pos()),
                      bytes.size());
  Image img(w, h);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()), need, img.rgb.begin());
  return img;
}

inline std::vector<std::uint8_t> write_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing '" + path + "'");
}

inline Image load_ppm(const std::string& path) { return read_ppm(read_file_bytes(path)); }

/// (1, 3, H, W) tensor with values in [0, 1].
inline Tensor image_to_tensor(const Image& img) {
  Tensor t({1, 3, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = img.pixel(x, y)[c] / 255.0f;
  return t;
}

/// Bilinear resize with half-pixel centers (src = (dst + 0.5) * in / out - 0.5).
inline Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ConfigError("resize target must be positive");
  if (out_h == x.h() && out_w == x.w()) return x;
  Tensor y({x.n(), x.c(), out_h, out_w});
  const float sy = static_cast<float>(x.h()) / out_h, sx = static_cast<float>(x.w()) / out_w;
  struct Tap {
    int i0, i1;
    float f;
  };
  auto taps = [](int out, int in, float s) {
    std::vector<Tap> t(out);
    for (int d = 0; d < out; ++d) {
      float src = std::max((d + 0.5f) * s - 0.5f, 0.0f);
      int i0 = std::min(static_cast<int>(src), in - 1);
      int i1 = std::min(i0 + 1, in - 1);
      t[d] = {i0, i1, src - static_cast<float>(i0)};
    }
    return t;
  };
  const auto ty = taps(out_h, x.h(), sy), tx = taps(out_w, x.w(), sx);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(n, c);
      float* dst = y.plane(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const Tap& a = ty[oy];
        const float* r0 = src + static_cast<std::size_t>(a.i0) * x.w();
        const float* r1 = src + static_cast<std::size_t>(a.i1) * x.w();
        for (int ox = 0; ox < out_w; ++ox) {
          const Tap& b = tx[ox];
          const float top = r0[b.i0] + (r0[b.i1] - r0[b.i0]) * b.f;
          const float bot = r1[b.i0] + (r1[b.i1] - r1[b.i0]) * b.f;
          dst[static_cast<std::size_t>(oy) * out_w + ox] = top + (bot - top) * a.f;
        }
      }
    }
  return y;
}

inline constexpr std::array<float, 3> kImageMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageStd{0.229f, 0.224f, 0.225f};
inline constexpr int kInputPadMultiple = 64;

/// Network input plus the bookkeeping to map boxes back.
struct PreparedInput {
  Tensor tensor;  // (1, 3, padded_h, padded_w), normalized, zero padding
  int original_w = 0, original_h = 0;
  int resized_w = 0, resized_h = 0;
  float scale_x = 1.0f, scale_y = 1.0f;  // resized / original
};

/// Resized dims for a shortest side of `s`, aspect preserved (rounded).
inline std::pair<int, int> resized_size(int w, int h, int s) {
  if (s <= 0) throw ConfigError("shortest side must be positive");
  if (std::min(w, h) == s) return {w, h};
  const double f = static_cast<double>(s) / std::min(w, h);
  return {w <= h ? s : static_cast<int>(std::lround(w * f)), h <= w ? s : static_cast<int>(std::lround(h * f))};
}

inline int round_up(int v, int m) { return (v + m - 1) / m * m; }

/// Scale to [0, 1], resize so the shortest side is `shortest_side`,
/// normalize with ImageNet statistics, pad bottom/right with zeros to a
/// multiple of 64.
inline PreparedInput prepare_input(const Image& img, int shortest_side) {
  PreparedInput p;
  p.original_w = img.width;
  p.original_h = img.height;
  std::tie(p.resized_w, p.resized_h) = resized_size(img.width, img.height, shortest_side);
  p.scale_x = static_cast<float>(p.resized_w) / img.width;
  p.scale_y = static_cast<float>(p.resized_h) / img.height;
  const Tensor resized = resize_bilinear(image_to_tensor(img), p.resized_h, p.resized_w);
  p.tensor = Tensor({1, 3, round_up(p.resized_h, kInputPadMultiple), round_up(p.resized_w, kInputPadMultiple)});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < p.resized_h; ++y)
      for (int x = 0; x < p.resized_w; ++x)
        p.tensor.at(0, c, y, x) = (resized.at(0, c, y, x) - kImageMean[c]) / kImageStd[c];
  return p;
}

}  // namespace lightdense
