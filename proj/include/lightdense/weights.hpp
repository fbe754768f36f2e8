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

// Seeded initialization, parameter accounting, and the MPRW weight file.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "lightdense/errors.hpp"
#include "lightdense/graph.hpp"
#include "lightdense/qtensor.hpp"

namespace lightdense {

enum class WeightDType : std::uint8_t { kF32 = 0, kI8 = 1, kU8 = 2, kI32 = 3 };

inline constexpr std::uint32_t kWeightFileVersion = 1;
inline constexpr char kWeightMagic[4] = {'M', 'P', 'R', 'W'};

inline std::size_t dtype_size(WeightDType t) {
  return (t == WeightDType::kF32 || t == WeightDType::kI32) ? 4 : 1;
}

/// One decoded weight-file entry. Float payloads live in `f32`, integer
/// payloads in `ints`.
struct WeightEntry {
  std::string name;
  WeightDType dtype = WeightDType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<float> f32;
  std::vector<std::int32_t> ints;
  std::optional<QuantParams> qparams;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

inline std::vector<std::uint32_t> dims_of(const Shape& s) {
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
}

/// A graph-side slot: what the file must contain and how to write it back.
struct WeightSlot {
  WeightEntry entry;
  std::function<void(const WeightEntry&)> assign;
};

inline WeightEntry float_entry(std::string name, const Tensor& t) {
  WeightEntry e;
  e.name = std::move(name);
  e.dims = dims_of(t.shape());
  e.f32.assign(t.data().begin(), t.data().end());
  return e;
}

inline WeightEntry act_entry(std::string name, const QuantParams& qp) {
  WeightEntry e;
  e.name = std::move(name);
  e.dtype = WeightDType::kU8;
  e.dims = {0};
  e.qparams = qp;
  return e;
}

/// Enumerates every stored value of `g` in a stable order. Shared nodes store
/// weights only on their owner; quantized biases are per node.
inline std::vector<WeightSlot> weight_slots(ModelGraph& g) {
  std::vector<WeightSlot> slots;
  for (auto& n : g.nodes) {
    GraphNode* np = &n;
    if (n.param_owner.empty()) {
      for (auto& [key, t] : n.params) {
        Tensor* tp = &t;
        slots.push_back({float_entry(n.name + "." + key, t), [tp](const WeightEntry& e) {
                           std::copy(e.f32.begin(), e.f32.end(), tp->raw());
                         }});
      }
      if (n.qweight) {
        WeightEntry e;
        e.name = n.name + ".weight";
        e.dtype = WeightDType::kI8;
        e.dims = dims_of(n.qweight->shape);
        e.ints.assign(n.qweight->data.begin(), n.qweight->data.end());
        e.qparams = n.qweight->qparams;
        slots.push_back({std::move(e), [np](const WeightEntry& in) {
                           np->qweight->data.assign(in.ints.begin(), in.ints.end());
                           np->qweight->qparams = *in.qparams;
                         }});
      }
    }
    if (!n.qbias.empty()) {
      WeightEntry e;
      e.name = n.name + ".bias";
      e.dtype = WeightDType::kI32;
      e.dims = {static_cast<std::uint32_t>(n.qbias.size())};
      e.ints = n.qbias;
      e.qparams = n.qbias_params;
      slots.push_back({std::move(e), [np](const WeightEntry& in) {
                         np->qbias = in.ints;
                         np->qbias_params = in.qparams;
                       }});
    }
    if (n.preact_qparams) {
      slots.push_back({act_entry("act:" + n.output + ".preact", *n.preact_qparams),
                       [np](const WeightEntry& in) { np->preact_qparams = *in.qparams; }});
    }
    if (n.out_qparams) {
      slots.push_back({act_entry("act:" + n.output, *n.out_qparams),
                       [np](const WeightEntry& in) { np->out_qparams = *in.qparams; }});
    }
  }
  return slots;
}

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    const U u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  void put_bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float get_f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }
  std::string get_string(std::size_t len, const char* what) {
    need(len, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw FormatError(std::string("truncated weight file reading ") + what, pos_);
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Serializes a list of entries.
inline std::vector<std::uint8_t> encode_weight_entries(const std::vector<WeightEntry>& entries) {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kWeightMagic, 4));
  w.put(kWeightFileVersion);
  w.put(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xFFFF) throw ConfigError("weight name too long: " + e.name);
    w.put(static_cast<std::uint16_t>(e.name.size()));
    w.put_bytes(e.name);
    w.put(static_cast<std::uint8_t>(e.dtype));
    w.put(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) w.put(d);
    const std::size_t count = e.count();
    switch (e.dtype) {
      case WeightDType::kF32:
        for (std::size_t i = 0; i < count; ++i) w.put_f32(e.f32[i]);
        break;
      case WeightDType::kI8:
      case WeightDType::kU8:
        for (std::size_t i = 0; i < count; ++i) w.put(static_cast<std::uint8_t>(e.ints[i]));
        break;
      case WeightDType::kI32:
        for (std::size_t i = 0; i < count; ++i) w.put(e.ints[i]);
        break;
    }
    if (e.dtype != WeightDType::kF32) {
      if (!e.qparams) throw InternalError("integer weight entry '" + e.name + "' without qparams");
      const QuantParams& q = *e.qparams;
      w.put(static_cast<std::uint8_t>(q.per_channel ? 1 : 0));
      for (float s : q.scale) w.put_f32(s);
      for (auto z : q.zero_point) w.put(z);
    }
  }
  return w.take();
}

/// Parses a weight file. Any byte-level problem raises FormatError with the
/// offending offset.
inline std::vector<WeightEntry> decode_weight_entries(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.get_string(4, "magic") != std::string_view(kWeightMagic, 4)) throw FormatError("bad magic", 0);
  const std::size_t version_at = r.pos();
  if (r.get<std::uint32_t>("version") != kWeightFileVersion)
    throw FormatError("unsupported weight file version", version_at);
  const auto count = r.get<std::uint32_t>("entry count");
  std::vector<WeightEntry> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightEntry e;
    e.name = r.get_string(r.get<std::uint16_t>("name length"), "name");
    const std::size_t dtype_at = r.pos();
    const auto code = r.get<std::uint8_t>("dtype");
    if (code > 3) throw FormatError("unknown dtype code " + std::to_string(code), dtype_at);
    e.dtype = static_cast<WeightDType>(code);
    const auto rank = r.get<std::uint8_t>("rank");
    std::uint64_t elems = 1;
    for (int d = 0; d < rank; ++d) {
      e.dims.push_back(r.get<std::uint32_t>("dims"));
      elems *= e.dims.back();
      if (elems > bytes.size()) throw FormatError("entry '" + e.name + "' larger than file", r.pos());
    }
    const std::size_t count_e = e.count();
    switch (e.dtype) {
      case WeightDType::kF32:
        e.f32.resize(count_e);
        for (auto& v : e.f32) v = r.get_f32("f32 data");
        break;
      case WeightDType::kI8:
        e.ints.resize(count_e);
        for (auto& v : e.ints) v = static_cast<std::int8_t>(r.get<std::uint8_t>("i8 data"));
        break;
      case WeightDType::kU8:
        e.ints.resize(count_e);
        for (auto& v : e.ints) v = r.get<std::uint8_t>("u8 data");
        break;
      case WeightDType::kI32:
        e.ints.resize(count_e);
        for (auto& v : e.ints) v = r.get<std::int32_t>("i32 data");
        break;
    }
    if (e.dtype != WeightDType::kF32) {
      const std::size_t flag_at = r.pos();
      const auto flag = r.get<std::uint8_t>("per-channel flag");
      if (flag > 1) throw FormatError("bad per-channel flag", flag_at);
      QuantParams q;
      q.per_channel = flag == 1;
      q.dtype = e.dtype == WeightDType::kU8 ? QDType::kU8 : QDType::kI8;
      const std::size_t n = q.per_channel ? (e.dims.empty() ? 0 : e.dims[0]) : 1;
      if (n == 0) throw FormatError("per-channel entry '" + e.name + "' has no channels", flag_at);
      q.scale.resize(n);
      q.zero_point.resize(n);
      for (auto& s : q.scale) s = r.get_f32("scale");
      for (auto& z : q.zero_point) z = r.get<std::int32_t>("zero point");
      e.qparams = std::move(q);
    }
    out.push_back(std::move(e));
  }
  if (!r.done()) throw FormatError("trailing bytes after last entry", r.pos());
  return out;
}

inline std::vector<std::uint8_t> save_weights(const ModelGraph& g) {
  auto& mut = const_cast<ModelGraph&>(g);  // slots are only read here
  std::vector<WeightEntry> entries;
  for (auto& s : detail::weight_slots(mut)) entries.push_back(std::move(s.entry));
  return encode_weight_entries(entries);
}

/// Loads values into a graph of matching structure. The set of names must
/// match exactly and dims/dtypes must agree (ConfigError otherwise).
inline void load_weights(ModelGraph& g, std::span<const std::uint8_t> bytes) {
  auto entries = decode_weight_entries(bytes);
  std::map<std::string, const WeightEntry*> by_name;
  for (const auto& e : entries)
    if (!by_name.emplace(e.name, &e).second) throw ConfigError("duplicate weight entry '" + e.name + "'");
  auto slots = detail::weight_slots(g);
  std::set<std::string> expected;
  for (const auto& s : slots) expected.insert(s.entry.name);
  for (const auto& e : entries)
    if (!expected.count(e.name))
      throw ConfigError("weight file has entry '" + e.name + "' unknown to the model");
  for (auto& s : slots) {
    auto it = by_name.find(s.entry.name);
    if (it == by_name.end()) throw ConfigError("weight file is missing '" + s.entry.name + "'");
    const WeightEntry& e = *it->second;
    if (e.dtype != s.entry.dtype)
      throw ConfigError("weight '" + e.name + "' has dtype " + std::to_string(int(e.dtype)) +
                        ", model expects " + std::to_string(int(s.entry.dtype)));
    if (e.dims != s.entry.dims) throw ConfigError("weight '" + e.name + "' has mismatched dims");
    if (e.qparams) {
      try {
        e.qparams->validate();
      } catch (const ConfigError& err) {
        throw ConfigError("weight '" + e.name + "': " + err.what());
      }
      if (s.entry.qparams && e.qparams->per_channel != s.entry.qparams->per_channel)
        throw ConfigError("weight '" + e.name + "' quantization granularity mismatch");
    }
    s.assign(e);
  }
}

/// Learnable parameter count: weights, biases, BN gamma/beta, fusion lambdas.
/// BN running statistics and shared duplicates are excluded.
inline std::size_t parameter_count(const ModelGraph& g) {
  std::size_t total = 0;
  for (const auto& n : g.nodes) {
    if (!n.param_owner.empty()) continue;
    for (const auto& [key, t] : n.params)
      if (is_learnable_param(key)) total += t.size();
    if (n.qweight) total += n.qweight->size() + n.qbias.size();
  }
  return total;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline int fan_in(const GraphNode& n) {
  if (n.kind == OpKind::kLinear) return n.attrs.in_features;
  const auto& s = n.attrs.conv;
  return s.in_channels / s.groups * s.kernel_h * s.kernel_w;
}

}  // namespace detail

/// Deterministic random weights: each node draws from its own stream seeded
/// by (seed, node name), so adding a node does not perturb the others.
/// Convs/linears: N(0, init_std or sqrt(2 / fan_in)), zero bias.
/// BN: gamma U(0.6, 1), beta U(-0.1, 0.1), mean U(-0.1, 0.1), var U(0.8, 1.2).
inline void initialize_weights(ModelGraph& g, std::uint64_t seed) {
  for (auto& n : g.nodes) {
    if (!n.param_owner.empty() || n.params.empty()) continue;
    std::mt19937_64 rng(detail::fnv1a(n.name) ^ seed);
    auto fill_uniform = [&](Tensor& t, float lo, float hi) {
      std::uniform_real_distribution<float> d(lo, hi);
      for (auto& v : t.data()) v = d(rng);
    };
    switch (n.kind) {
      case OpKind::kConv:
      case OpKind::kDepthwiseConv:
      case OpKind::kFusedConv:
      case OpKind::kLinear: {
        const float std_dev = n.attrs.init_std > 0.0f
                                  ? n.attrs.init_std
                                  : std::sqrt(2.0f / static_cast<float>(detail::fan_in(n)));
        std::normal_distribution<float> d(0.0f, std_dev);
        for (auto& v : n.params.at("weight").data()) v = d(rng);
        if (auto it = n.params.find("bias"); it != n.params.end())
          std::fill(it->second.data().begin(), it->second.data().end(), 0.0f);
        break;
      }
      case OpKind::kBatchNorm:
        fill_uniform(n.params.at("gamma"), 0.6f, 1.0f);
        fill_uniform(n.params.at("beta"), -0.1f, 0.1f);
        fill_uniform(n.params.at("running_mean"), -0.1f, 0.1f);
        fill_uniform(n.params.at("running_var"), 0.8f, 1.2f);
        break;
      case OpKind::kWeightedSum:
        for (auto& v : n.params.at("lambda").data()) v = 1.0f;
        break;
      default: break;
    }
  }
}

}  // namespace lightdense
