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

// Computation-graph IR: named nodes in topological order, one output tensor
// per node, and named taps that must stay resolvable across rewrites.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lightdense/errors.hpp"
#include "lightdense/kernels.hpp"
#include "lightdense/qtensor.hpp"
#include "lightdense/roi_align.hpp"
#include "lightdense/tensor.hpp"

namespace lightdense {

enum class OpKind {
  kConv,
  kDepthwiseConv,
  kBatchNorm,
  kActivation,
  kMaxPool,
  kResize,
  kAdd,
  kConcat,
  kLinear,
  kQuantize,
  kDequantize,
  kFusedConv,
  kGlobalAvgPool,
  kChannelScale,
  kWeightedSum,
  kRoiAlign,
  kMultiLevelRoiAlign,
};

inline std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::kConv: return "conv";
    case OpKind::kDepthwiseConv: return "depthwise_conv";
    case OpKind::kBatchNorm: return "batch_norm";
    case OpKind::kActivation: return "activation";
    case OpKind::kMaxPool: return "max_pool";
    case OpKind::kResize: return "resize";
    case OpKind::kAdd: return "add";
    case OpKind::kConcat: return "concat";
    case OpKind::kLinear: return "linear";
    case OpKind::kQuantize: return "quantize";
    case OpKind::kDequantize: return "dequantize";
    case OpKind::kFusedConv: return "fused_conv";
    case OpKind::kGlobalAvgPool: return "global_avg_pool";
    case OpKind::kChannelScale: return "channel_scale";
    case OpKind::kWeightedSum: return "weighted_sum";
    case OpKind::kRoiAlign: return "roi_align";
    case OpKind::kMultiLevelRoiAlign: return "multilevel_roi_align";
  }
  return "unknown";
}

inline bool is_conv_like(OpKind k) {
  return k == OpKind::kConv || k == OpKind::kDepthwiseConv || k == OpKind::kFusedConv;
}

enum class FusionKind { kSum, kFastNormalized };

inline std::string_view to_string(FusionKind k) {
  return k == FusionKind::kSum ? "sum" : "fast_normalized";
}

inline FusionKind parse_fusion_kind(std::string_view s) {
  if (s == "sum") return FusionKind::kSum;
  if (s == "fast_normalized") return FusionKind::kFastNormalized;
  throw ConfigError("unknown fusion kind '" + std::string(s) + "'");
}

/// Kind-specific attributes. Only the fields relevant to a node's kind are read.
struct NodeAttrs {
  ConvSpec conv;                                  // conv, depthwise, fused conv
  Activation activation = Activation::kIdentity;  // activation node, fused epilogue, linear
  PoolSpec pool;
  float eps = 1e-5f;  // batch norm epsilon; weighted-sum epsilon
  FusionKind fusion = FusionKind::kFastNormalized;
  RoiAlignParams roi;
  int min_level = 2;  // multilevel roi align
  int in_features = 0;
  int out_features = 0;
  float init_std = 0.0f;  // 0: fan-in based default
};

struct GraphNode {
  std::string name;
  OpKind kind = OpKind::kConv;
  std::vector<std::string> inputs;
  std::string output;
  NodeAttrs attrs;
  std::map<std::string, Tensor> params;
  // Non-empty: weights are read from that (earlier) node.
  std::string param_owner;

  // Quantized state; empty on float graphs.
  std::optional<QuantizedTensor> qweight;
  std::vector<std::int32_t> qbias;
  std::optional<QuantParams> qbias_params;
  std::optional<QuantParams> out_qparams;
  std::optional<QuantParams> preact_qparams;
};

/// Learnable parameters; everything else in GraphNode::params is a buffer.
inline bool is_learnable_param(std::string_view name) {
  return name == "weight" || name == "bias" || name == "gamma" || name == "beta" || name == "lambda";
}

class ModelGraph {
 public:
  std::vector<GraphNode> nodes;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> taps;
  bool fused = false;
  bool quantized = false;

  const GraphNode* find(std::string_view name) const {
    for (const auto& n : nodes)
      if (n.name == name) return &n;
    return nullptr;
  }
  GraphNode* find(std::string_view name) {
    return const_cast<GraphNode*>(std::as_const(*this).find(name));
  }
  const GraphNode& node(std::string_view name) const {
    if (const auto* n = find(name)) return *n;
    throw ConfigError("no node named '" + std::string(name) + "'");
  }
  GraphNode& node(std::string_view name) {
    return const_cast<GraphNode&>(std::as_const(*this).node(name));
  }

  const GraphNode* producer_of(std::string_view tensor) const {
    for (const auto& n : nodes)
      if (n.output == tensor) return &n;
    return nullptr;
  }

  std::vector<const GraphNode*> consumers_of(std::string_view tensor) const {
    std::vector<const GraphNode*> out;
    for (const auto& n : nodes)
      if (std::find(n.inputs.begin(), n.inputs.end(), tensor) != n.inputs.end()) out.push_back(&n);
    return out;
  }

  bool is_input(std::string_view t) const {
    return std::find(inputs.begin(), inputs.end(), t) != inputs.end();
  }
  bool is_output(std::string_view t) const {
    return std::find(outputs.begin(), outputs.end(), t) != outputs.end();
  }
  bool is_tap(std::string_view t) const {
    return std::find(taps.begin(), taps.end(), t) != taps.end();
  }
  bool resolves(std::string_view t) const { return is_input(t) || producer_of(t) != nullptr; }

  /// The node whose params/qweight back `n` (itself unless shared).
  const GraphNode& params_node(const GraphNode& n) const {
    return n.param_owner.empty() ? n : node(n.param_owner);
  }

  void add_tap(const std::string& tensor) {
    if (!is_tap(tensor)) taps.push_back(tensor);
  }

  /// Renames a tensor everywhere: producer output, consumers, outputs, taps.
  void rename_tensor(const std::string& from, const std::string& to) {
    for (auto& n : nodes) {
      if (n.output == from) n.output = to;
      for (auto& in : n.inputs)
        if (in == from) in = to;
    }
    for (auto* list : {&inputs, &outputs, &taps})
      for (auto& t : *list)
        if (t == from) t = to;
  }

  /// Structural checks: unique names, single producers, topological order,
  /// resolvable outputs and taps, parameter shapes consistent with attributes.
  void validate() const {
    std::set<std::string> names, produced(inputs.begin(), inputs.end());
    if (produced.size() != inputs.size()) throw ConfigError("duplicate graph input name");
    for (const auto& n : nodes) {
      if (!names.insert(n.name).second) throw ConfigError("duplicate node name '" + n.name + "'");
      for (const auto& in : n.inputs) {
        if (!produced.count(in))
          throw ConfigError("node '" + n.name + "' consumes '" + in +
                            "' which has no earlier producer (cycle or dangling edge)");
      }
      if (n.output.empty()) throw ConfigError("node '" + n.name + "' has no output");
      if (!produced.insert(n.output).second)
        throw ConfigError("tensor '" + n.output + "' has more than one producer");
      if (!n.param_owner.empty()) {
        const auto* owner = find(n.param_owner);
        if (owner == nullptr || !names.count(n.param_owner) || owner->kind != n.kind)
          throw ConfigError("node '" + n.name + "' shares params with invalid owner '" +
                            n.param_owner + "'");
      }
      check_params(n);
    }
    for (const auto& o : outputs)
      if (!produced.count(o)) throw ConfigError("graph output '" + o + "' does not resolve");
    for (const auto& t : taps)
      if (!produced.count(t)) throw ConfigError("tap '" + t + "' does not resolve");
  }

 private:
  void check_params(const GraphNode& n) const {
    const GraphNode& p = params_node(n);
    auto expect = [&](const std::string& key, const Shape& s) {
      auto it = p.params.find(key);
      if (it == p.params.end())
        throw ConfigError("node '" + n.name + "' missing parameter '" + key + "'");
      if (it->second.shape() != s)
        throw ConfigError("node '" + n.name + "' parameter '" + key + "' has shape " +
                          to_string(it->second.shape()) + ", expected " + to_string(s));
    };
    auto expect_weights = [&](const Shape& w, int out_channels, bool has_bias) {
      if (p.qweight) {
        if (p.qweight->shape != w)
          throw ConfigError("node '" + n.name + "' quantized weight has shape " +
                            to_string(p.qweight->shape) + ", expected " + to_string(w));
        if (has_bias && n.qbias.size() != static_cast<std::size_t>(out_channels))
          throw ConfigError("node '" + n.name + "' quantized bias length mismatch");
        return;
      }
      expect("weight", w);
      if (has_bias) expect("bias", {1, out_channels, 1, 1});
    };
    switch (n.kind) {
      case OpKind::kConv:
      case OpKind::kDepthwiseConv:
      case OpKind::kFusedConv:
        n.attrs.conv.validate();
        if (n.kind == OpKind::kDepthwiseConv && !n.attrs.conv.is_depthwise())
          throw ConfigError("depthwise node '" + n.name + "' has non-depthwise spec");
        expect_weights(n.attrs.conv.weight_shape(), n.attrs.conv.out_channels, n.attrs.conv.has_bias);
        break;
      case OpKind::kLinear:
        expect_weights({n.attrs.out_features, n.attrs.in_features, 1, 1}, n.attrs.out_features, true);
        break;
      case OpKind::kBatchNorm:
        for (const char* k : {"gamma", "beta", "running_mean", "running_var"})
          expect(k, {1, n.attrs.conv.out_channels, 1, 1});
        break;
      case OpKind::kWeightedSum:
        expect("lambda", {1, static_cast<int>(n.inputs.size()), 1, 1});
        break;
      default: break;
    }
  }
};

/// Appends nodes with freshly shaped (zero) parameters. Tensor names equal
/// node names unless renamed later.
class GraphBuilder {
 public:
  explicit GraphBuilder(ModelGraph& g) : g_(g) {}

  std::string input(const std::string& name) {
    g_.inputs.push_back(name);
    return name;
  }

  void output(const std::string& tensor) { g_.outputs.push_back(tensor); }
  void tap(const std::string& tensor) { g_.add_tap(tensor); }

  std::string conv(const std::string& name, const std::string& in, const ConvSpec& spec,
                   float init_std = 0.0f) {
    spec.validate();
    GraphNode n = make(name, spec.is_depthwise() ? OpKind::kDepthwiseConv : OpKind::kConv, {in});
    n.attrs.conv = spec;
    n.attrs.init_std = init_std;
    n.params["weight"] = Tensor(spec.weight_shape());
    if (spec.has_bias) n.params["bias"] = Tensor({1, spec.out_channels, 1, 1});
    return push(std::move(n));
  }

  /// Conv node reusing `owner`'s weights.
  std::string shared_conv(const std::string& name, const std::string& in, const std::string& owner) {
    const GraphNode& o = g_.node(owner);
    GraphNode n = make(name, o.kind, {in});
    n.attrs = o.attrs;
    n.param_owner = owner;
    return push(std::move(n));
  }

  std::string batch_norm(const std::string& name, const std::string& in, int channels,
                         float eps = 1e-5f) {
    GraphNode n = make(name, OpKind::kBatchNorm, {in});
    n.attrs.conv.out_channels = channels;
    n.attrs.eps = eps;
    n.params["gamma"] = Tensor({1, channels, 1, 1}, 1.0f);
    n.params["beta"] = Tensor({1, channels, 1, 1});
    n.params["running_mean"] = Tensor({1, channels, 1, 1});
    n.params["running_var"] = Tensor({1, channels, 1, 1}, 1.0f);
    return push(std::move(n));
  }

  /// Identity activations emit no node.
  std::string activation(const std::string& name, const std::string& in, Activation act) {
    if (act == Activation::kIdentity) return in;
    GraphNode n = make(name, OpKind::kActivation, {in});
    n.attrs.activation = act;
    return push(std::move(n));
  }

  /// conv (no bias) -> batch norm -> activation; nodes "<p>.conv", "<p>.bn", "<p>.act".
  std::string conv_bn_act(const std::string& prefix, const std::string& in, ConvSpec spec,
                          Activation act) {
    spec.has_bias = false;
    std::string t = conv(prefix + ".conv", in, spec);
    t = batch_norm(prefix + ".bn", t, spec.out_channels);
    return activation(prefix + ".act", t, act);
  }

  std::string max_pool(const std::string& name, const std::string& in, const PoolSpec& spec) {
    spec.validate();
    GraphNode n = make(name, OpKind::kMaxPool, {in});
    n.attrs.pool = spec;
    return push(std::move(n));
  }

  /// Nearest-neighbor resize of `in` to the spatial size of `like`.
  std::string resize_like(const std::string& name, const std::string& in, const std::string& like) {
    return push(make(name, OpKind::kResize, {in, like}));
  }

  std::string add(const std::string& name, const std::string& a, const std::string& b) {
    return push(make(name, OpKind::kAdd, {a, b}));
  }

  std::string concat(const std::string& name, std::vector<std::string> ins) {
    if (ins.empty()) throw ConfigError("concat node '" + name + "' has no inputs");
    return push(make(name, OpKind::kConcat, std::move(ins)));
  }

  std::string linear(const std::string& name, const std::string& in, int in_features,
                     int out_features, float init_std = 0.0f) {
    GraphNode n = make(name, OpKind::kLinear, {in});
    n.attrs.in_features = in_features;
    n.attrs.out_features = out_features;
    n.attrs.init_std = init_std;
    n.params["weight"] = Tensor({out_features, in_features, 1, 1});
    n.params["bias"] = Tensor({1, out_features, 1, 1});
    return push(std::move(n));
  }

  std::string global_avg_pool(const std::string& name, const std::string& in) {
    return push(make(name, OpKind::kGlobalAvgPool, {in}));
  }

  std::string channel_scale(const std::string& name, const std::string& x, const std::string& gate) {
    return push(make(name, OpKind::kChannelScale, {x, gate}));
  }

  std::string weighted_sum(const std::string& name, std::vector<std::string> ins, FusionKind kind,
                           float eps = 1e-4f) {
    if (ins.empty()) throw ConfigError("weighted sum '" + name + "' has no inputs");
    const int k = static_cast<int>(ins.size());
    GraphNode n = make(name, OpKind::kWeightedSum, std::move(ins));
    n.attrs.fusion = kind;
    n.attrs.eps = eps;
    n.params["lambda"] = Tensor({1, k, 1, 1}, 1.0f);
    return push(std::move(n));
  }

  std::string roi_align(const std::string& name, const std::string& rois, const std::string& feature,
                        const RoiAlignParams& p) {
    GraphNode n = make(name, OpKind::kRoiAlign, {rois, feature});
    n.attrs.roi = p;
    return push(std::move(n));
  }

  std::string multilevel_roi_align(const std::string& name, const std::string& rois,
                                   const std::vector<std::string>& features, int min_level,
                                   int output_size, int sampling_ratio) {
    std::vector<std::string> ins{rois};
    ins.insert(ins.end(), features.begin(), features.end());
    GraphNode n = make(name, OpKind::kMultiLevelRoiAlign, std::move(ins));
    n.attrs.min_level = min_level;
    n.attrs.roi.output_size = output_size;
    n.attrs.roi.sampling_ratio = sampling_ratio;
    return push(std::move(n));
  }

  ModelGraph& graph() { return g_; }

 private:
  static GraphNode make(const std::string& name, OpKind kind, std::vector<std::string> ins) {
    GraphNode n;
    n.name = name;
    n.kind = kind;
    n.inputs = std::move(ins);
    n.output = name;
    return n;
  }

  std::string push(GraphNode n) {
    if (g_.find(n.name) != nullptr) throw ConfigError("duplicate node name '" + n.name + "'");
    for (const auto& in : n.inputs) {
      if (!g_.resolves(in))
        throw ConfigError("node '" + n.name + "' consumes unknown tensor '" + in + "'");
    }
    std::string out = n.output;
    g_.nodes.push_back(std::move(n));
    return out;
  }

  ModelGraph& g_;
};

}  // namespace lightdense
