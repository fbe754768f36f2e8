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

// Affine 8-bit quantization primitives.
//
// real = scale * (q - zero_point). Activations use u8 asymmetric parameters,
// weights use i8 symmetric per-output-channel parameters (zero_point 0).
// Every float -> integer conversion rounds half to even.

#pragma once

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lightdense/errors.hpp"
#include "lightdense/tensor.hpp"

namespace lightdense {

enum class QDType : std::uint8_t { kU8, kI8 };

constexpr int qmin(QDType t) { return t == QDType::kU8 ? 0 : -128; }
constexpr int qmax(QDType t) { return t == QDType::kU8 ? 255 : 127; }

/// Round to nearest, ties to even. Relies on the default FE_TONEAREST mode.
inline double round_half_even(double x) { return std::nearbyint(x); }

inline std::int64_t round_half_even_to_int(double x) {
  return static_cast<std::int64_t>(std::nearbyint(x));
}

struct QuantParams {
  std::vector<float> scale{1.0f};
  std::vector<std::int32_t> zero_point{0};
  QDType dtype = QDType::kU8;
  bool per_channel = false;

  static QuantParams per_tensor(float scale, std::int32_t zp, QDType dtype) {
    QuantParams q;
    q.scale = {scale};
    q.zero_point = {zp};
    q.dtype = dtype;
    return q;
  }

  std::size_t channels() const { return scale.size(); }
  float scale_at(std::size_t c) const { return per_channel ? scale[c] : scale[0]; }
  std::int32_t zero_point_at(std::size_t c) const {
    return per_channel ? zero_point[c] : zero_point[0];
  }

  void validate() const {
    if (scale.empty() || scale.size() != zero_point.size())
      throw ConfigError("quant params need matching non-empty scale/zero_point lists");
    if (!per_channel && scale.size() != 1)
      throw ConfigError("per-tensor quant params must have exactly one scale");
    for (std::size_t i = 0; i < scale.size(); ++i) {
      if (!(scale[i] > 0.0f) || !std::isfinite(scale[i]))
        throw ConfigError("quant scale must be positive and finite");
      if (zero_point[i] < qmin(dtype) || zero_point[i] > qmax(dtype))
        throw ConfigError("zero point " + std::to_string(zero_point[i]) + " out of dtype range");
    }
  }

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// 8-bit tensor. Values are stored widened to int16 for simple kernels; the
/// representable range is still that of `qparams.dtype`.
struct QuantizedTensor {
  Shape shape{};
  std::vector<std::int16_t> data;
  QuantParams qparams;

  std::size_t size() const { return data.size(); }
};

/// Scale/zero-point covering [min, max] (range widened to include 0).
inline QuantParams choose_qparams(float min_v, float max_v, QDType dtype, bool symmetric) {
  if (!(min_v <= max_v)) throw InputError("choose_qparams requires min <= max");
  min_v = std::min(min_v, 0.0f);
  max_v = std::max(max_v, 0.0f);
  const int lo = qmin(dtype), hi = qmax(dtype);
  if (symmetric) {
    const float amax = std::max(std::fabs(min_v), std::fabs(max_v));
    if (amax == 0.0f) return QuantParams::per_tensor(1.0f, 0, dtype);
    return QuantParams::per_tensor(amax / static_cast<float>(hi), 0, dtype);
  }
  if (max_v == min_v) return QuantParams::per_tensor(1.0f, 0, dtype);
  const float scale = (max_v - min_v) / static_cast<float>(hi - lo);
  const auto zp = std::clamp<std::int64_t>(
      round_half_even_to_int(static_cast<double>(lo) - static_cast<double>(min_v) / scale), lo, hi);
  return QuantParams::per_tensor(scale, static_cast<std::int32_t>(zp), dtype);
}

inline std::int16_t quantize_value(float x, float scale, std::int32_t zp, QDType dtype) {
  const double q = round_half_even(static_cast<double>(x) / scale) + zp;
  return static_cast<std::int16_t>(
      std::clamp(q, static_cast<double>(qmin(dtype)), static_cast<double>(qmax(dtype))));
}

inline float dequantize_value(std::int32_t q, float scale, std::int32_t zp) {
  return static_cast<float>(q - zp) * scale;
}

/// Per-channel params apply along the N axis (output channels of a weight).
inline QuantizedTensor quantize_tensor(const Tensor& x, const QuantParams& qp) {
  qp.validate();
  if (qp.per_channel && qp.channels() != static_cast<std::size_t>(x.n()))
    throw ConfigError("per-channel quant params need one entry per output channel");
  QuantizedTensor q;
  q.shape = x.shape();
  q.qparams = qp;
  q.data.resize(x.size());
  const std::size_t per = x.n() > 0 ? x.size() / x.n() : 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t ch = per ? i / per : 0;
    q.data[i] = quantize_value(x[i], qp.scale_at(ch), qp.zero_point_at(ch), qp.dtype);
  }
  return q;
}

inline Tensor dequantize_tensor(const QuantizedTensor& q) {
  Tensor x(q.shape);
  const std::size_t per = q.shape.n > 0 ? q.size() / q.shape.n : 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const std::size_t ch = per ? i / per : 0;
    x[i] = dequantize_value(q.data[i], q.qparams.scale_at(ch), q.qparams.zero_point_at(ch));
  }
  return x;
}

/// Symmetric i8 weights, one scale per output channel; all-zero channels get scale 1.
inline QuantizedTensor quantize_weights_per_channel(const Tensor& w) {
  QuantParams qp;
  qp.dtype = QDType::kI8;
  qp.per_channel = true;
  qp.scale.assign(w.n(), 1.0f);
  qp.zero_point.assign(w.n(), 0);
  const std::size_t per = w.n() > 0 ? w.size() / w.n() : 0;
  for (int o = 0; o < w.n(); ++o) {
    float amax = 0.0f;
    for (std::size_t i = 0; i < per; ++i) amax = std::max(amax, std::fabs(w[o * per + i]));
    qp.scale[o] = choose_qparams(-amax, amax, QDType::kI8, true).scale[0];
  }
  return quantize_tensor(w, qp);
}

}  // namespace lightdense
