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

// Integer kernels over u8 activations and i8 per-channel weights.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "lightdense/detail/gemm.hpp"
#include "lightdense/errors.hpp"
#include "lightdense/kernels.hpp"
#include "lightdense/qtensor.hpp"

namespace lightdense {

/// real multiplier ~= m0 * 2^-shift with m0 in [2^30, 2^31).
struct FixedPointMultiplier {
  std::int32_t m0 = 0;
  int shift = 0;
};

inline FixedPointMultiplier make_multiplier(double real) {
  if (!(real > 0.0) || !std::isfinite(real))
    throw InternalError("requantization multiplier must be positive and finite");
  int exp = 0;
  const double frac = std::frexp(real, &exp);  // real = frac * 2^exp, frac in [0.5, 1)
  auto m0 = round_half_even_to_int(std::ldexp(frac, 31));
  if (m0 == (std::int64_t{1} << 31)) {
    m0 >>= 1;
    ++exp;
  }
  return {static_cast<std::int32_t>(m0), 31 - exp};
}

/// round_half_even(v / 2^shift) for shift >= 1, exact on integers.
inline __int128 shift_round_half_even(__int128 v, int shift) {
  const __int128 q = v >> shift;  // floor
  const __int128 r = v - (q << shift);
  const __int128 half = static_cast<__int128>(1) << (shift - 1);
  if (r > half || (r == half && (q & 1) != 0)) return q + 1;
  return q;
}

/// round_half_even(acc * m0 * 2^-shift), saturated to int64.
inline std::int64_t apply_multiplier(std::int64_t acc, const FixedPointMultiplier& m) {
  constexpr auto kMax = static_cast<__int128>(std::numeric_limits<std::int64_t>::max());
  constexpr auto kMin = static_cast<__int128>(std::numeric_limits<std::int64_t>::min());
  __int128 prod = static_cast<__int128>(acc) * m.m0;
  __int128 out;
  if (m.shift >= 126) {
    out = 0;
  } else if (m.shift > 0) {
    out = shift_round_half_even(prod, m.shift);
  } else {
    const int left = -m.shift;
    out = prod;
    for (int i = 0; i < left && out <= kMax && out >= kMin; ++i) out *= 2;
  }
  if (out > kMax) return std::numeric_limits<std::int64_t>::max();
  if (out < kMin) return std::numeric_limits<std::int64_t>::min();
  return static_cast<std::int64_t>(out);
}

/// Output range after a fused clamp-type activation (identity, relu, relu6).
inline std::pair<int, int> activation_clamp(Activation act, const QuantParams& out) {
  int lo = qmin(out.dtype), hi = qmax(out.dtype);
  const int zp = out.zero_point[0];
  switch (act) {
    case Activation::kIdentity: break;
    case Activation::kRelu: lo = std::max(lo, zp); break;
    case Activation::kRelu6: {
      lo = std::max(lo, zp);
      const auto six = round_half_even_to_int(6.0 / out.scale[0]) + zp;
      hi = static_cast<int>(std::min<std::int64_t>(hi, six));
      break;
    }
    default:
      throw InternalError("activation " + std::string(to_string(act)) +
                          " is not a range clamp; use a lookup table");
  }
  return {lo, std::max(lo, hi)};
}

inline bool is_clamp_activation(Activation a) {
  return a == Activation::kIdentity || a == Activation::kRelu || a == Activation::kRelu6;
}

namespace detail {

inline void check_activation_tensor(const QuantizedTensor& x, const char* what) {
  if (x.qparams.dtype != QDType::kU8 || x.qparams.per_channel)
    throw ConfigError(std::string(what) + " expects a per-tensor u8 activation");
}

// Accumulator bound: |q_x - z_x| <= 255, |q_w| <= 128. The bias is added in
// 64-bit after the reduction.
inline void check_accumulator_bound(std::int64_t k) {
  const std::int64_t bound = k * 255 * 128;
  if (bound > std::numeric_limits<std::int32_t>::max())
    throw InternalError("int32 accumulator may overflow (reduction length " + std::to_string(k) +
                        ")");
}

}  // namespace detail

/// Quantized convolution:
///   acc_o = sum (q_x - z_x) * q_w + bias_o
///   out   = clamp(rhe(acc_o * s_x * s_w[o] / s_out) + z_out)
/// The fused activation must be a clamp type (identity, relu, relu6).
inline QuantizedTensor quantized_conv2d(const QuantizedTensor& qx, const QuantizedTensor& qw,
                                        std::span<const std::int32_t> bias, const ConvSpec& spec,
                                        const QuantParams& out_qp,
                                        Activation act = Activation::kIdentity) {
  spec.validate();
  detail::check_activation_tensor(qx, "quantized_conv2d");
  out_qp.validate();
  if (qx.shape.c != spec.in_channels)
    throw ConfigError("quantized conv input channels " + std::to_string(qx.shape.c) +
                      " != spec.in_channels " + std::to_string(spec.in_channels));
  if (qw.shape != spec.weight_shape())
    throw ConfigError("quantized conv weight shape " + to_string(qw.shape) + " != " +
                      to_string(spec.weight_shape()));
  if (qw.qparams.dtype != QDType::kI8) throw ConfigError("quantized conv weights must be i8");
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(spec.out_channels))
    throw ConfigError("quantized conv bias length mismatch");
  const int cin_g = spec.in_channels / spec.groups;
  const int cout_g = spec.out_channels / spec.groups;
  const int K = cin_g * spec.kernel_h * spec.kernel_w;
  detail::check_accumulator_bound(K);

  const Shape os = spec.output_shape(qx.shape);
  const int N = os.h * os.w;
  const float s_x = qx.qparams.scale[0];
  const std::int32_t z_x = qx.qparams.zero_point[0];
  const auto [lo, hi] = activation_clamp(act, out_qp);
  const std::int32_t z_out = out_qp.zero_point[0];

  std::vector<FixedPointMultiplier> mult(spec.out_channels);
  for (int o = 0; o < spec.out_channels; ++o) {
    mult[o] = make_multiplier(static_cast<double>(s_x) * qw.qparams.scale_at(o) /
                              static_cast<double>(out_qp.scale[0]));
  }

  QuantizedTensor out;
  out.shape = os;
  out.qparams = out_qp;
  out.data.resize(os.count());
  std::vector<std::int32_t> acc(static_cast<std::size_t>(os.c) * N);
  std::vector<std::int16_t> col;
  std::vector<std::int16_t> w16(qw.data.begin(), qw.data.end());
  const std::size_t in_plane = qx.shape.plane();

  for (int n = 0; n < qx.shape.n; ++n) {
    const std::int16_t* xin = qx.data.data() + static_cast<std::size_t>(n) * qx.shape.c * in_plane;
    if (spec.is_depthwise()) {
      std::fill(acc.begin(), acc.end(), 0);
      for (int c = 0; c < os.c; ++c) {
        const std::int16_t* src = xin + c * in_plane;
        std::int32_t* dst = acc.data() + static_cast<std::size_t>(c) * N;
        const std::int16_t* wk = w16.data() + static_cast<std::size_t>(c) * K;
        for (int kh = 0; kh < spec.kernel_h; ++kh) {
          for (int kw = 0; kw < spec.kernel_w; ++kw) {
            const std::int32_t wv = wk[kh * spec.kernel_w + kw];
            for (int oy = 0; oy < os.h; ++oy) {
              const int iy = oy * spec.stride_h - spec.pad_h + kh * spec.dilation_h;
              if (iy < 0 || iy >= qx.shape.h) continue;
              const std::int16_t* row = src + static_cast<std::size_t>(iy) * qx.shape.w;
              std::int32_t* drow = dst + static_cast<std::size_t>(oy) * os.w;
              const int off = kw * spec.dilation_w - spec.pad_w;
              const auto [lo, hi] = detail::valid_output_range(os.w, spec.stride_w, off, qx.shape.w);
              for (int ox = lo; ox < hi; ++ox) drow[ox] += wv * (row[ox * spec.stride_w + off] - z_x);
            }
          }
        }
      }
    } else {
      for (int g = 0; g < spec.groups; ++g) {
        // Column matrix of (q_x - z_x); padding is real zero, i.e. q == z_x.
        col.assign(static_cast<std::size_t>(K) * N, 0);
        std::size_t r = 0;
        for (int ci = 0; ci < cin_g; ++ci) {
          const std::int16_t* src = xin + static_cast<std::size_t>(g * cin_g + ci) * in_plane;
          for (int kh = 0; kh < spec.kernel_h; ++kh) {
            for (int kw = 0; kw < spec.kernel_w; ++kw, ++r) {
              std::int16_t* dst = col.data() + r * N;
              for (int oy = 0; oy < os.h; ++oy) {
                const int iy = oy * spec.stride_h - spec.pad_h + kh * spec.dilation_h;
                if (iy < 0 || iy >= qx.shape.h) continue;
                const std::int16_t* row = src + static_cast<std::size_t>(iy) * qx.shape.w;
                std::int16_t* drow = dst + static_cast<std::size_t>(oy) * os.w;
                const int off = kw * spec.dilation_w - spec.pad_w;
                const auto [lo, hi] = detail::valid_output_range(os.w, spec.stride_w, off, qx.shape.w);
                for (int ox = lo; ox < hi; ++ox)
                  drow[ox] = static_cast<std::int16_t>(row[ox * spec.stride_w + off] - z_x);
              }
            }
          }
        }
        detail::gemm_s16(cout_g, N, K, w16.data() + static_cast<std::size_t>(g) * cout_g * K, col.data(),
                         acc.data() + static_cast<std::size_t>(g) * cout_g * N);
      }
    }
    std::int16_t* dst = out.data.data() + static_cast<std::size_t>(n) * os.c * N;
    for (int o = 0; o < os.c; ++o) {
      const std::int32_t b = bias.empty() ? 0 : bias[o];
      for (int i = 0; i < N; ++i) {
        const std::int64_t v = apply_multiplier(static_cast<std::int64_t>(acc[o * N + i]) + b, mult[o]) + z_out;
        dst[o * N + i] = static_cast<std::int16_t>(std::clamp<std::int64_t>(v, lo, hi));
      }
    }
  }
  return out;
}

/// Fully connected layer over flattened (c, h, w), expressed as a 1x1 conv.
inline QuantizedTensor quantized_linear(const QuantizedTensor& qx, const QuantizedTensor& qw,
                                        std::span<const std::int32_t> bias, const QuantParams& out_qp,
                                        Activation act = Activation::kIdentity) {
  QuantizedTensor flat = qx;
  flat.shape = {qx.shape.n, qx.shape.c * qx.shape.h * qx.shape.w, 1, 1};
  ConvSpec spec;
  spec.in_channels = flat.shape.c;
  spec.out_channels = qw.shape.n;
  spec.has_bias = !bias.empty();
  return quantized_conv2d(flat, qw, bias, spec, out_qp, act);
}

/// Integer bias for a conv whose accumulator has scale s_x * s_w[o].
inline std::vector<std::int32_t> quantize_bias(std::span<const float> bias, float s_x,
                                               const QuantParams& w_qp) {
  std::vector<std::int32_t> out(bias.size());
  for (std::size_t o = 0; o < bias.size(); ++o) {
    const double s = static_cast<double>(s_x) * w_qp.scale_at(o);
    const auto q = round_half_even_to_int(bias[o] / s);
    out[o] = static_cast<std::int32_t>(std::clamp<std::int64_t>(
        q, std::numeric_limits<std::int32_t>::min() / 2, std::numeric_limits<std::int32_t>::max() / 2));
  }
  return out;
}

inline QuantParams bias_qparams(float s_x, const QuantParams& w_qp) {
  QuantParams qp;
  qp.per_channel = true;
  qp.dtype = QDType::kI8;  // dtype field unused for i32 payloads
  qp.scale.resize(w_qp.channels());
  qp.zero_point.assign(w_qp.channels(), 0);
  for (std::size_t o = 0; o < w_qp.channels(); ++o) qp.scale[o] = s_x * w_qp.scale_at(o);
  return qp;
}

/// Requantize sum_i coeffs[i] * real(x_i) into out_qp. Covers add (coeffs 1)
/// and BiFPN weighted fusion.
inline QuantizedTensor quantized_scaled_sum(std::span<const QuantizedTensor* const> xs,
                                            std::span<const float> coeffs, const QuantParams& out_qp) {
  if (xs.empty() || xs.size() != coeffs.size())
    throw ConfigError("quantized_scaled_sum operand/coefficient mismatch");
  for (const auto* x : xs) {
    detail::check_activation_tensor(*x, "quantized_scaled_sum");
    if (x->shape != xs.front()->shape)
      throw ConfigError("quantized_scaled_sum shape mismatch " + to_string(x->shape));
  }
  out_qp.validate();
  QuantizedTensor out;
  out.shape = xs.front()->shape;
  out.qparams = out_qp;
  out.data.resize(out.shape.count());
  const double s_out = out_qp.scale[0];
  const int z_out = out_qp.zero_point[0];
  std::vector<double> mul(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) mul[k] = static_cast<double>(coeffs[k]) * xs[k]->qparams.scale[0];
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double real = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k)
      real += mul[k] * (xs[k]->data[i] - xs[k]->qparams.zero_point[0]);
    const double q = round_half_even(real / s_out) + z_out;
    out.data[i] = static_cast<std::int16_t>(std::clamp(q, 0.0, 255.0));
  }
  return out;
}

inline QuantizedTensor quantized_concat(std::span<const QuantizedTensor* const> xs,
                                        const QuantParams& out_qp) {
  if (xs.empty()) throw ConfigError("concat of zero tensors");
  const Shape s0 = xs.front()->shape;
  int channels = 0;
  for (const auto* x : xs) {
    detail::check_activation_tensor(*x, "quantized_concat");
    if (x->shape.n != s0.n || x->shape.h != s0.h || x->shape.w != s0.w)
      throw ConfigError("concat operand " + to_string(x->shape) + " incompatible with " + to_string(s0));
    channels += x->shape.c;
  }
  QuantizedTensor out;
  out.shape = {s0.n, channels, s0.h, s0.w};
  out.qparams = out_qp;
  out.data.resize(out.shape.count());
  const std::size_t plane = s0.plane();
  for (int n = 0; n < s0.n; ++n) {
    std::size_t off = static_cast<std::size_t>(n) * channels * plane;
    for (const auto* x : xs) {
      const std::size_t len = static_cast<std::size_t>(x->shape.c) * plane;
      const std::int16_t* src = x->data.data() + static_cast<std::size_t>(n) * len;
      if (x->qparams == out_qp) {
        std::copy_n(src, len, out.data.data() + off);
      } else {
        const double ratio = static_cast<double>(x->qparams.scale[0]) / out_qp.scale[0];
        const int z_in = x->qparams.zero_point[0], z_out = out_qp.zero_point[0];
        for (std::size_t i = 0; i < len; ++i) {
          const double q = round_half_even(ratio * (src[i] - z_in)) + z_out;
          out.data[off + i] = static_cast<std::int16_t>(std::clamp(q, 0.0, 255.0));
        }
      }
      off += len;
    }
  }
  return out;
}

/// Max pooling on integer codes; qparams pass through unchanged.
inline QuantizedTensor quantized_max_pool2d(const QuantizedTensor& x, const PoolSpec& spec) {
  spec.validate();
  const int oh = spec.output_extent(x.shape.h), ow = spec.output_extent(x.shape.w);
  QuantizedTensor out;
  out.shape = {x.shape.n, x.shape.c, oh, ow};
  out.qparams = x.qparams;
  out.data.resize(out.shape.count());
  for (int p = 0; p < x.shape.n * x.shape.c; ++p) {
    const std::int16_t* src = x.data.data() + static_cast<std::size_t>(p) * x.shape.plane();
    std::int16_t* dst = out.data.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const int y0 = std::max(oy * spec.stride - spec.padding, 0);
      const int y1 = std::min(oy * spec.stride - spec.padding + spec.kernel, x.shape.h);
      for (int ox = 0; ox < ow; ++ox) {
        const int x0 = std::max(ox * spec.stride - spec.padding, 0);
        const int x1 = std::min(ox * spec.stride - spec.padding + spec.kernel, x.shape.w);
        int m = std::numeric_limits<int>::min();
        for (int yy = y0; yy < y1; ++yy)
          for (int xx = x0; xx < x1; ++xx) m = std::max<int>(m, src[yy * x.shape.w + xx]);
        dst[oy * ow + ox] = static_cast<std::int16_t>(m);
      }
    }
  }
  return out;
}

inline QuantizedTensor quantized_resize_nearest(const QuantizedTensor& x, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ConfigError("resize target must be positive");
  QuantizedTensor out;
  out.shape = {x.shape.n, x.shape.c, out_h, out_w};
  out.qparams = x.qparams;
  out.data.resize(out.shape.count());
  for (int p = 0; p < x.shape.n * x.shape.c; ++p) {
    const std::int16_t* src = x.data.data() + static_cast<std::size_t>(p) * x.shape.plane();
    std::int16_t* dst = out.data.data() + static_cast<std::size_t>(p) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const int iy = static_cast<int>(static_cast<std::int64_t>(oy) * x.shape.h / out_h);
      for (int ox = 0; ox < out_w; ++ox) {
        const int ix = static_cast<int>(static_cast<std::int64_t>(ox) * x.shape.w / out_w);
        dst[oy * out_w + ox] = src[iy * x.shape.w + ix];
      }
    }
  }
  return out;
}

inline QuantizedTensor quantized_global_avg_pool(const QuantizedTensor& x, const QuantParams& out_qp) {
  detail::check_activation_tensor(x, "quantized_global_avg_pool");
  if (x.shape.plane() == 0) throw InputError("global_avg_pool on empty spatial extent");
  QuantizedTensor out;
  out.shape = {x.shape.n, x.shape.c, 1, 1};
  out.qparams = out_qp;
  out.data.resize(out.shape.count());
  const double ratio = static_cast<double>(x.qparams.scale[0]) / out_qp.scale[0];
  for (int p = 0; p < x.shape.n * x.shape.c; ++p) {
    const std::int16_t* src = x.data.data() + static_cast<std::size_t>(p) * x.shape.plane();
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < x.shape.plane(); ++i) sum += src[i] - x.qparams.zero_point[0];
    const double mean = static_cast<double>(sum) / static_cast<double>(x.shape.plane());
    const double q = round_half_even(mean * ratio) + out_qp.zero_point[0];
    out.data[p] = static_cast<std::int16_t>(std::clamp(q, 0.0, 255.0));
  }
  return out;
}

/// Elementwise activation through a 256-entry table mapping input codes to
/// output codes.
inline std::array<std::int16_t, 256> activation_table(Activation act, const QuantParams& in,
                                                      const QuantParams& out) {
  std::array<std::int16_t, 256> lut{};
  for (int q = 0; q < 256; ++q) {
    const float real = dequantize_value(q, in.scale[0], in.zero_point[0]);
    lut[q] = quantize_value(apply_activation(real, act), out.scale[0], out.zero_point[0], out.dtype);
  }
  return lut;
}

inline QuantizedTensor quantized_activation(const QuantizedTensor& x, Activation act,
                                            const QuantParams& out_qp) {
  detail::check_activation_tensor(x, "quantized_activation");
  const auto lut = activation_table(act, x.qparams, out_qp);
  QuantizedTensor out;
  out.shape = x.shape;
  out.qparams = out_qp;
  out.data.resize(x.data.size());
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = lut[x.data[i]];
  return out;
}

}  // namespace lightdense
