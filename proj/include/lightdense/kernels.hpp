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

// Float32 reference kernels. Every function is pure: identical inputs give
// bitwise-identical outputs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lightdense/detail/gemm.hpp"
#include "lightdense/errors.hpp"
#include "lightdense/tensor.hpp"

namespace lightdense {

enum class Activation { kIdentity, kRelu, kRelu6, kHardSigmoid, kHardSwish };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kRelu6: return "relu6";
    case Activation::kHardSigmoid: return "h_sigmoid";
    case Activation::kHardSwish: return "h_swish";
  }
  return "identity";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "relu6") return Activation::kRelu6;
  if (s == "h_sigmoid") return Activation::kHardSigmoid;
  if (s == "h_swish") return Activation::kHardSwish;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline float relu6(float x) { return std::min(std::max(x, 0.0f), 6.0f); }
inline float hard_sigmoid(float x) { return relu6(x + 3.0f) / 6.0f; }
inline float hard_swish(float x) { return x * hard_sigmoid(x); }

inline float apply_activation(float x, Activation a) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kRelu: return std::max(x, 0.0f);
    case Activation::kRelu6: return relu6(x);
    case Activation::kHardSigmoid: return hard_sigmoid(x);
    case Activation::kHardSwish: return hard_swish(x);
  }
  return x;
}

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;
  int dilation_h = 1;
  int dilation_w = 1;
  int groups = 1;
  bool has_bias = false;

  /// Square kernel with "same" padding floor(d*(k-1)/2).
  static ConvSpec same(int in, int out, int k, int stride = 1, int dilation = 1,
                       int groups = 1, bool bias = false) {
    ConvSpec s;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel_h = s.kernel_w = k;
    s.stride_h = s.stride_w = stride;
    s.dilation_h = s.dilation_w = dilation;
    s.pad_h = s.pad_w = dilation * (k - 1) / 2;
    s.groups = groups;
    s.has_bias = bias;
    return s;
  }

  bool is_depthwise() const {
    return groups > 1 && groups == in_channels && groups == out_channels;
  }

  void validate() const {
    if (in_channels <= 0 || out_channels <= 0)
      throw ConfigError("conv channels must be positive");
    if (groups <= 0 || in_channels % groups != 0 || out_channels % groups != 0)
      throw ConfigError("conv channels (" + std::to_string(in_channels) + ", " +
                        std::to_string(out_channels) + ") not divisible by groups " +
                        std::to_string(groups));
    if (kernel_h <= 0 || kernel_w <= 0 || stride_h <= 0 || stride_w <= 0 ||
        dilation_h <= 0 || dilation_w <= 0)
      throw ConfigError("conv kernel, stride and dilation must be positive");
    if (pad_h < 0 || pad_w < 0) throw ConfigError("conv padding must be non-negative");
  }

  Shape weight_shape() const {
    return {out_channels, in_channels / groups, kernel_h, kernel_w};
  }

  Shape output_shape(const Shape& in) const {
    const int oh = (in.h + 2 * pad_h - dilation_h * (kernel_h - 1) - 1) / stride_h + 1;
    const int ow = (in.w + 2 * pad_w - dilation_w * (kernel_w - 1) - 1) / stride_w + 1;
    if (in.h + 2 * pad_h - dilation_h * (kernel_h - 1) - 1 < 0 ||
        in.w + 2 * pad_w - dilation_w * (kernel_w - 1) - 1 < 0)
      throw ConfigError("conv kernel larger than padded input " + to_string(in));
    return {in.n, out_channels, oh, ow};
  }

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

namespace detail {

inline void check_conv_operands(const Tensor& x, const Tensor& w, std::span<const float> bias,
                                const ConvSpec& spec) {
  spec.validate();
  if (x.c() != spec.in_channels)
    throw ConfigError("conv input channels " + std::to_string(x.c()) + " != spec.in_channels " +
                      std::to_string(spec.in_channels));
  const Shape ws = spec.weight_shape();
  if (w.shape() != ws) {
    std::string dim = w.n() != ws.n   ? "out_channels"
                      : w.c() != ws.c ? "in_channels/groups"
                      : w.h() != ws.h ? "kernel_h"
                                      : "kernel_w";
    throw ConfigError("conv weight shape " + to_string(w.shape()) + " mismatches spec " +
                      to_string(ws) + " in dimension " + dim);
  }
  if (spec.has_bias != !bias.empty())
    throw ConfigError("conv bias presence does not match spec.has_bias");
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(spec.out_channels))
    throw ConfigError("conv bias length " + std::to_string(bias.size()) + " != out_channels");
}

// Column matrix [cin_g*kh*kw, oh*ow] for one image and one channel group, rows
// ordered (channel, kh, kw). Out-of-range taps are zero.
/// Output columns [lo, hi) whose input column ox * stride + off lies in [0, w).
inline std::pair<int, int> valid_output_range(int out_w, int stride, int off, int w) {
  int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  int hi = w - off <= 0 ? 0 : (w - off - 1) / stride + 1;
  lo = std::min(lo, out_w);
  hi = std::clamp(hi, lo, out_w);
  return {lo, hi};
}

inline void im2col(const Tensor& x, int n, int c0, const ConvSpec& s, int oh, int ow,
                   std::vector<float>& col) {
  const int cin_g = s.in_channels / s.groups;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  col.assign(static_cast<std::size_t>(cin_g) * s.kernel_h * s.kernel_w * cols, 0.0f);
  std::size_t row = 0;
  for (int ci = 0; ci < cin_g; ++ci) {
    const float* src = x.plane(n, c0 + ci);
    for (int kh = 0; kh < s.kernel_h; ++kh) {
      for (int kw = 0; kw < s.kernel_w; ++kw, ++row) {
        float* dst = col.data() + row * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride_h - s.pad_h + kh * s.dilation_h;
          if (iy < 0 || iy >= x.h()) continue;
          const float* src_row = src + static_cast<std::size_t>(iy) * x.w();
          float* dst_row = dst + static_cast<std::size_t>(oy) * ow;
          const int off = kw * s.dilation_w - s.pad_w;
          const auto [lo, hi] = valid_output_range(ow, s.stride_w, off, x.w());
          for (int ox = lo; ox < hi; ++ox) dst_row[ox] = src_row[ox * s.stride_w + off];
        }
      }
    }
  }
}

inline bool is_pointwise_identity_layout(const ConvSpec& s) {
  return s.kernel_h == 1 && s.kernel_w == 1 && s.stride_h == 1 && s.stride_w == 1 &&
         s.pad_h == 0 && s.pad_w == 0;
}

}  // namespace detail

/// Grouped 2-D convolution with zero padding. Per output element the sum runs
/// over (input channel, kh, kw) in that order, then the bias is added.
inline Tensor conv2d(const Tensor& x, const Tensor& w, std::span<const float> bias,
                     const ConvSpec& spec) {
  detail::check_conv_operands(x, w, bias, spec);
  const Shape os = spec.output_shape(x.shape());
  Tensor y(os);
  const int cin_g = spec.in_channels / spec.groups;
  const int cout_g = spec.out_channels / spec.groups;
  const int K = cin_g * spec.kernel_h * spec.kernel_w;
  const int N = os.h * os.w;
  std::vector<float> col;
  for (int n = 0; n < x.n(); ++n) {
    for (int g = 0; g < spec.groups; ++g) {
      const float* b_mat;
      if (detail::is_pointwise_identity_layout(spec)) {
        b_mat = x.plane(n, g * cin_g);
      } else {
        detail::im2col(x, n, g * cin_g, spec, os.h, os.w, col);
        b_mat = col.data();
      }
      const float* a_mat = w.raw() + static_cast<std::size_t>(g) * cout_g * K;
      detail::gemm<float>(cout_g, N, K, a_mat, b_mat, y.plane(n, g * cout_g));
    }
    if (!bias.empty()) {
      for (int o = 0; o < os.c; ++o) {
        float* p = y.plane(n, o);
        for (int i = 0; i < N; ++i) p[i] += bias[o];
      }
    }
  }
  return y;
}

/// Depthwise convolution (groups == channels). Same accumulation order as
/// conv2d with groups == channels, so the two agree bitwise.
inline Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, std::span<const float> bias,
                               const ConvSpec& spec) {
  if (!(spec.groups == spec.in_channels && spec.groups == spec.out_channels))
    throw ConfigError("depthwise conv requires groups == in_channels == out_channels (groups=" +
                      std::to_string(spec.groups) + ", in=" + std::to_string(spec.in_channels) +
                      ", out=" + std::to_string(spec.out_channels) + ")");
  detail::check_conv_operands(x, w, bias, spec);
  const Shape os = spec.output_shape(x.shape());
  Tensor y(os);
  const int kh_n = spec.kernel_h, kw_n = spec.kernel_w;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < os.c; ++c) {
      const float* src = x.plane(n, c);
      const float* wk = w.raw() + static_cast<std::size_t>(c) * kh_n * kw_n;
      float* dst = y.plane(n, c);
      for (int kh = 0; kh < kh_n; ++kh) {
        for (int kw = 0; kw < kw_n; ++kw) {
          const float wv = wk[kh * kw_n + kw];
          const int dx = kw * spec.dilation_w - spec.pad_w;
          // Valid output columns: 0 <= ox*stride + dx < W.
          int ox_begin = dx >= 0 ? 0 : (-dx + spec.stride_w - 1) / spec.stride_w;
          int ox_end = x.w() - dx <= 0 ? 0 : (x.w() - dx - 1) / spec.stride_w + 1;
          ox_end = std::min(ox_end, os.w);
          for (int oy = 0; oy < os.h; ++oy) {
            const int iy = oy * spec.stride_h - spec.pad_h + kh * spec.dilation_h;
            if (iy < 0 || iy >= x.h()) continue;
            const float* src_row = src + static_cast<std::size_t>(iy) * x.w();
            float* dst_row = dst + static_cast<std::size_t>(oy) * os.w;
            if (spec.stride_w == 1) {
              for (int ox = ox_begin; ox < ox_end; ++ox) dst_row[ox] += wv * src_row[ox + dx];
            } else {
              for (int ox = ox_begin; ox < ox_end; ++ox)
                dst_row[ox] += wv * src_row[ox * spec.stride_w + dx];
            }
          }
        }
      }
      if (!bias.empty()) {
        for (std::size_t i = 0; i < os.plane(); ++i) dst[i] += bias[c];
      }
    }
  }
  return y;
}

/// Inference-mode batch normalization.
inline Tensor batch_norm(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                         std::span<const float> mean, std::span<const float> var, float eps) {
  const auto c = static_cast<std::size_t>(x.c());
  if (gamma.size() != c || beta.size() != c || mean.size() != c || var.size() != c)
    throw ConfigError("batch_norm parameter length does not match channel count " +
                      std::to_string(c));
  for (std::size_t i = 0; i < c; ++i) {
    if (var[i] < 0.0f) throw InputError("batch_norm variance is negative at channel " +
                                        std::to_string(i));
  }
  Tensor y(x.shape());
  for (int n = 0; n < x.n(); ++n) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const float inv = 1.0f / std::sqrt(var[ch] + eps);
      const float* src = x.plane(n, ch);
      float* dst = y.plane(n, ch);
      for (std::size_t i = 0; i < x.shape().plane(); ++i)
        dst[i] = gamma[ch] * (src[i] - mean[ch]) * inv + beta[ch];
    }
  }
  return y;
}

inline Tensor activate(const Tensor& x, Activation kind) {
  Tensor y(x.shape());
  auto src = x.data();
  auto dst = y.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = apply_activation(src[i], kind);
  return y;
}

struct PoolSpec {
  int kernel = 2;
  int stride = 2;
  int padding = 0;
  bool ceil_mode = false;

  int output_extent(int in) const {
    const int span = in + 2 * padding - kernel;
    if (span < 0) throw ConfigError("pool window " + std::to_string(kernel) +
                                    " larger than padded input " + std::to_string(in + 2 * padding));
    int out = (ceil_mode ? (span + stride - 1) / stride : span / stride) + 1;
    // A window may not start inside the right padding.
    if (ceil_mode && (out - 1) * stride >= in + padding) --out;
    return out;
  }

  void validate() const {
    if (kernel <= 0 || stride <= 0) throw ConfigError("pool kernel and stride must be positive");
    if (padding < 0 || 2 * padding > kernel)
      throw ConfigError("pool padding must be in [0, kernel/2]");
  }
};

/// Max pooling; padded positions behave as -infinity and are never selected.
inline Tensor max_pool2d(const Tensor& x, const PoolSpec& spec) {
  spec.validate();
  const int oh = spec.output_extent(x.h());
  const int ow = spec.output_extent(x.w());
  Tensor y({x.n(), x.c(), oh, ow});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(n, c);
      float* dst = y.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        const int y0 = std::max(oy * spec.stride - spec.padding, 0);
        const int y1 = std::min(oy * spec.stride - spec.padding + spec.kernel, x.h());
        for (int ox = 0; ox < ow; ++ox) {
          const int x0 = std::max(ox * spec.stride - spec.padding, 0);
          const int x1 = std::min(ox * spec.stride - spec.padding + spec.kernel, x.w());
          float m = -std::numeric_limits<float>::infinity();
          for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx) m = std::max(m, src[yy * x.w() + xx]);
          dst[oy * ow + ox] = m;
        }
      }
    }
  }
  return y;
}

/// Nearest-neighbor resize; source index = floor(dst * in / out).
inline Tensor resize_nearest(const Tensor& x, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ConfigError("resize target must be positive");
  Tensor y({x.n(), x.c(), out_h, out_w});
  std::vector<int> sx(out_w);
  for (int ox = 0; ox < out_w; ++ox)
    sx[ox] = static_cast<int>(static_cast<std::int64_t>(ox) * x.w() / out_w);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(n, c);
      float* dst = y.plane(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const int iy = static_cast<int>(static_cast<std::int64_t>(oy) * x.h() / out_h);
        const float* src_row = src + static_cast<std::size_t>(iy) * x.w();
        for (int ox = 0; ox < out_w; ++ox) dst[oy * out_w + ox] = src_row[sx[ox]];
      }
    }
  }
  return y;
}

inline Tensor global_avg_pool(const Tensor& x) {
  if (x.h() * x.w() <= 0) throw InputError("global_avg_pool on empty spatial extent");
  Tensor y({x.n(), x.c(), 1, 1});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float* src = x.plane(n, c);
      double sum = 0.0;
      for (std::size_t i = 0; i < x.shape().plane(); ++i) sum += src[i];
      y.at(n, c, 0, 0) = static_cast<float>(sum / static_cast<double>(x.shape().plane()));
    }
  }
  return y;
}

inline Tensor concat_channels(std::span<const Tensor* const> xs) {
  if (xs.empty()) throw ConfigError("concat of zero tensors");
  const Shape& s0 = xs.front()->shape();
  int channels = 0;
  for (const Tensor* t : xs) {
    if (t->n() != s0.n || t->h() != s0.h || t->w() != s0.w)
      throw ConfigError("concat operand " + to_string(t->shape()) + " incompatible with " +
                        to_string(s0));
    channels += t->c();
  }
  Tensor y({s0.n, channels, s0.h, s0.w});
  for (int n = 0; n < s0.n; ++n) {
    int c_off = 0;
    for (const Tensor* t : xs) {
      const std::size_t len = static_cast<std::size_t>(t->c()) * s0.plane();
      std::copy_n(t->plane(n, 0), len, y.plane(n, c_off));
      c_off += t->c();
    }
  }
  return y;
}

inline Tensor concat_channels(std::initializer_list<const Tensor*> xs) {
  return concat_channels(std::span<const Tensor* const>(xs.begin(), xs.size()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ConfigError("add shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

/// sum_i coeffs[i] * xs[i], accumulated in input order.
inline Tensor scaled_sum(std::span<const Tensor* const> xs, std::span<const float> coeffs) {
  if (xs.empty()) throw ConfigError("scaled_sum of zero tensors");
  if (xs.size() != coeffs.size()) throw ConfigError("scaled_sum coefficient count mismatch");
  for (const Tensor* t : xs) {
    if (t->shape() != xs.front()->shape())
      throw ConfigError("scaled_sum shape mismatch " + to_string(t->shape()) + " vs " +
                        to_string(xs.front()->shape()));
  }
  Tensor y(xs.front()->shape());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const float* src = xs[k]->raw();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += coeffs[k] * src[i];
  }
  return y;
}

/// x[n, c, :, :] * gate[n, c, 0, 0]
inline Tensor channel_scale(const Tensor& x, const Tensor& gate) {
  if (gate.n() != x.n() || gate.c() != x.c() || gate.h() != 1 || gate.w() != 1)
    throw ConfigError("channel_scale gate " + to_string(gate.shape()) + " incompatible with " +
                      to_string(x.shape()));
  Tensor y(x.shape());
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const float g = gate.at(n, c, 0, 0);
      const float* src = x.plane(n, c);
      float* dst = y.plane(n, c);
      for (std::size_t i = 0; i < x.shape().plane(); ++i) dst[i] = src[i] * g;
    }
  }
  return y;
}

/// Fully connected layer over the flattened (c, h, w) features of each batch
/// item. Weight shape (out, c*h*w, 1, 1); output (n, out, 1, 1).
inline Tensor linear(const Tensor& x, const Tensor& w, std::span<const float> bias) {
  const std::size_t k = static_cast<std::size_t>(x.c()) * x.shape().plane();
  if (static_cast<std::size_t>(w.c()) != k || w.h() != 1 || w.w() != 1)
    throw ConfigError("linear weight " + to_string(w.shape()) + " incompatible with input " +
                      to_string(x.shape()));
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(w.n()))
    throw ConfigError("linear bias length mismatch");
  Tensor y({x.n(), w.n(), 1, 1});
  for (int n = 0; n < x.n(); ++n) {
    const float* xs = x.plane(n, 0);
    for (int o = 0; o < w.n(); ++o) {
      const float* ws = w.plane(o, 0);
      float acc = 0.0f;
      for (std::size_t i = 0; i < k; ++i) acc += ws[i] * xs[i];
      if (!bias.empty()) acc += bias[o];
      y.at(n, o, 0, 0) = acc;
    }
  }
  return y;
}

/// Bilinear interpolation at continuous (row, col); coordinates outside the
/// grid are clamped to the border.
inline float bilinear_sample(const Tensor& x, int n, int c, float y, float xq) {
  const int h = x.h(), w = x.w();
  y = std::clamp(y, 0.0f, static_cast<float>(h - 1));
  xq = std::clamp(xq, 0.0f, static_cast<float>(w - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(xq));
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const float ly = y - static_cast<float>(y0), lx = xq - static_cast<float>(x0);
  const float hy = 1.0f - ly, hx = 1.0f - lx;
  const float* p = x.plane(n, c);
  return hy * hx * p[y0 * w + x0] + hy * lx * p[y0 * w + x1] + ly * hx * p[y1 * w + x0] +
         ly * lx * p[y1 * w + x1];
}

}  // namespace lightdense
