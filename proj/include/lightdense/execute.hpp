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

// Topological graph execution over float and quantized values.

#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lightdense/errors.hpp"
#include "lightdense/fusion.hpp"
#include "lightdense/graph.hpp"
#include "lightdense/kernels.hpp"
#include "lightdense/qkernels.hpp"
#include "lightdense/qtensor.hpp"
#include "lightdense/roi_align.hpp"

namespace lightdense {

using Value = std::variant<Tensor, QuantizedTensor>;
using ValueMap = std::map<std::string, Value>;

/// Called with every float tensor produced (and every float input bound)
/// during execution. Convs with a lookup-table activation also report their
/// pre-activation as "<output>.preact".
using TensorObserver = std::function<void(const std::string&, const Tensor&)>;

struct ExecOptions {
  std::vector<std::string> outputs;  // empty: the graph outputs
  TensorObserver observer;
};

struct ExecResult {
  ValueMap values;                      // requested outputs
  std::map<std::string, Tensor> taps;   // registered taps computed or bound in this call
};

inline Shape shape_of(const Value& v) {
  return std::holds_alternative<Tensor>(v) ? std::get<Tensor>(v).shape()
                                           : std::get<QuantizedTensor>(v).shape;
}

inline bool is_quantized(const Value& v) { return std::holds_alternative<QuantizedTensor>(v); }

/// Float view of a value (dequantizing if needed).
inline Tensor as_float(const Value& v) {
  if (const auto* t = std::get_if<Tensor>(&v)) return *t;
  return dequantize_tensor(std::get<QuantizedTensor>(v));
}

/// (K, 4, 1, 1) tensor of x1, y1, x2, y2 rows.
inline Tensor boxes_to_tensor(std::span<const Box> boxes) {
  Tensor t({static_cast<int>(boxes.size()), 4, 1, 1});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    t[4 * i] = boxes[i].x1;
    t[4 * i + 1] = boxes[i].y1;
    t[4 * i + 2] = boxes[i].x2;
    t[4 * i + 3] = boxes[i].y2;
  }
  return t;
}

inline std::vector<Box> tensor_to_boxes(const Tensor& t) {
  if (t.c() != 4 || t.h() != 1 || t.w() != 1)
    throw InputError("roi tensor must have shape (K, 4, 1, 1), got " + to_string(t.shape()));
  std::vector<Box> boxes(t.n());
  for (int i = 0; i < t.n(); ++i) boxes[i] = {t[4 * i], t[4 * i + 1], t[4 * i + 2], t[4 * i + 3]};
  return boxes;
}

namespace detail {

inline std::span<const float> param_span(const GraphNode& owner, const char* key) {
  auto it = owner.params.find(key);
  if (it == owner.params.end()) return {};
  return it->second.data();
}

inline const Tensor& param(const GraphNode& owner, const char* key) {
  auto it = owner.params.find(key);
  if (it == owner.params.end())
    throw ConfigError("node '" + owner.name + "' has no parameter '" + key + "'");
  return it->second;
}

inline const QuantParams& require_qparams(const std::optional<QuantParams>& q, const GraphNode& n) {
  if (!q) throw InternalError("quantized node '" + n.name + "' has no output qparams");
  return *q;
}

class NodeRunner {
 public:
  NodeRunner(const ModelGraph& g, const TensorObserver& obs) : g_(g), obs_(obs) {}

  Value run(const GraphNode& n, const std::vector<const Value*>& in) const {
    bool any_q = false;
    for (std::size_t i = 0; i < in.size(); ++i) {
      // RoI inputs are always float boxes.
      const bool roi_slot = (n.kind == OpKind::kRoiAlign || n.kind == OpKind::kMultiLevelRoiAlign) && i == 0;
      if (!roi_slot && is_quantized(*in[i])) any_q = true;
    }
    if (n.kind == OpKind::kQuantize) {
      return quantize_tensor(std::get<Tensor>(*in[0]), require_qparams(n.out_qparams, n));
    }
    if (n.kind == OpKind::kDequantize) return dequantize_tensor(std::get<QuantizedTensor>(*in[0]));
    return any_q ? run_quantized(n, in) : Value(run_float(n, in));
  }

 private:
  static const Tensor& F(const Value* v) { return std::get<Tensor>(*v); }
  static const QuantizedTensor& Q(const Value* v) {
    if (!is_quantized(*v)) throw InternalError("mixed float/quantized operands");
    return std::get<QuantizedTensor>(*v);
  }

  Tensor conv_epilogue(const GraphNode& n, Tensor y) const {
    const Activation act = n.attrs.activation;
    if (act == Activation::kIdentity) return y;
    if (obs_ && !is_clamp_activation(act)) obs_(n.output + ".preact", y);
    return activate(y, act);
  }

  Tensor run_float(const GraphNode& n, const std::vector<const Value*>& in) const {
    const GraphNode& owner = g_.params_node(n);
    switch (n.kind) {
      case OpKind::kConv:
      case OpKind::kDepthwiseConv:
      case OpKind::kFusedConv: {
        const Tensor& x = F(in[0]);
        const auto& spec = n.attrs.conv;
        Tensor y = spec.is_depthwise()
                       ? depthwise_conv2d(x, param(owner, "weight"), param_span(owner, "bias"), spec)
                       : conv2d(x, param(owner, "weight"), param_span(owner, "bias"), spec);
        return conv_epilogue(n, std::move(y));
      }
      case OpKind::kLinear:
        return conv_epilogue(n, linear(F(in[0]), param(owner, "weight"), param_span(owner, "bias")));
      case OpKind::kBatchNorm:
        return batch_norm(F(in[0]), param_span(owner, "gamma"), param_span(owner, "beta"),
                          param_span(owner, "running_mean"), param_span(owner, "running_var"),
                          n.attrs.eps);
      case OpKind::kActivation: return activate(F(in[0]), n.attrs.activation);
      case OpKind::kMaxPool: return max_pool2d(F(in[0]), n.attrs.pool);
      case OpKind::kResize: {
        const Shape like = shape_of(*in[1]);
        return resize_nearest(F(in[0]), like.h, like.w);
      }
      case OpKind::kAdd: return add(F(in[0]), F(in[1]));
      case OpKind::kConcat: {
        std::vector<const Tensor*> xs;
        for (const auto* v : in) xs.push_back(&F(v));
        return concat_channels(xs);
      }
      case OpKind::kGlobalAvgPool: return global_avg_pool(F(in[0]));
      case OpKind::kChannelScale: return channel_scale(F(in[0]), F(in[1]));
      case OpKind::kWeightedSum: {
        std::vector<const Tensor*> xs;
        for (const auto* v : in) xs.push_back(&F(v));
        return normalized_fusion(xs, param_span(owner, "lambda"), n.attrs.fusion, n.attrs.eps);
      }
      case OpKind::kRoiAlign: {
        const auto boxes = tensor_to_boxes(F(in[0]));
        return roi_align(F(in[1]), boxes, n.attrs.roi);
      }
      case OpKind::kMultiLevelRoiAlign: {
        const auto boxes = tensor_to_boxes(F(in[0]));
        std::vector<const Tensor*> levels;
        for (std::size_t i = 1; i < in.size(); ++i) levels.push_back(&F(in[i]));
        return multilevel_roi_align(levels, n.attrs.min_level, boxes, n.attrs.roi.output_size,
                                    n.attrs.roi.sampling_ratio);
      }
      default: break;
    }
    throw InternalError("node '" + n.name + "' of kind " + std::string(to_string(n.kind)) +
                        " has no float kernel");
  }

  QuantizedTensor run_quantized(const GraphNode& n, const std::vector<const Value*>& in) const {
    const GraphNode& owner = g_.params_node(n);
    switch (n.kind) {
      case OpKind::kConv:
      case OpKind::kDepthwiseConv:
      case OpKind::kFusedConv:
      case OpKind::kLinear: {
        if (!owner.qweight) throw InternalError("node '" + n.name + "' has no quantized weights");
        const Activation act = n.attrs.activation;
        const bool lut = !is_clamp_activation(act);
        const QuantParams& out_qp = require_qparams(lut ? n.preact_qparams : n.out_qparams, n);
        const Activation fused = lut ? Activation::kIdentity : act;
        QuantizedTensor y = n.kind == OpKind::kLinear
                                ? quantized_linear(Q(in[0]), *owner.qweight, n.qbias, out_qp, fused)
                                : quantized_conv2d(Q(in[0]), *owner.qweight, n.qbias, n.attrs.conv,
                                                   out_qp, fused);
        if (lut) return quantized_activation(y, act, require_qparams(n.out_qparams, n));
        return y;
      }
      case OpKind::kActivation:
        return quantized_activation(Q(in[0]), n.attrs.activation, require_qparams(n.out_qparams, n));
      case OpKind::kMaxPool: return quantized_max_pool2d(Q(in[0]), n.attrs.pool);
      case OpKind::kResize: {
        const Shape like = shape_of(*in[1]);
        return quantized_resize_nearest(Q(in[0]), like.h, like.w);
      }
      case OpKind::kAdd: {
        const std::vector<const QuantizedTensor*> xs{&Q(in[0]), &Q(in[1])};
        const std::vector<float> ones{1.0f, 1.0f};
        return quantized_scaled_sum(xs, ones, require_qparams(n.out_qparams, n));
      }
      case OpKind::kWeightedSum: {
        std::vector<const QuantizedTensor*> xs;
        for (const auto* v : in) xs.push_back(&Q(v));
        const auto w = fusion_weights(param_span(owner, "lambda"), n.attrs.fusion, n.attrs.eps);
        return quantized_scaled_sum(xs, w, require_qparams(n.out_qparams, n));
      }
      case OpKind::kConcat: {
        std::vector<const QuantizedTensor*> xs;
        for (const auto* v : in) xs.push_back(&Q(v));
        return quantized_concat(xs, require_qparams(n.out_qparams, n));
      }
      case OpKind::kGlobalAvgPool:
        return quantized_global_avg_pool(Q(in[0]), require_qparams(n.out_qparams, n));
      default: break;
    }
    throw InternalError("node '" + n.name + "' of kind " + std::string(to_string(n.kind)) +
                        " has no integer kernel");
  }

  const ModelGraph& g_;
  const TensorObserver& obs_;
};

}  // namespace detail

/// Evaluates the nodes needed for the requested outputs, in graph order.
/// Bound values may be graph inputs or intermediate tensors; a bound
/// intermediate short-circuits its producer.
inline ExecResult execute(const ModelGraph& g, ValueMap bindings, const ExecOptions& opts = {}) {
  const std::vector<std::string>& wanted = opts.outputs.empty() ? g.outputs : opts.outputs;

  std::set<std::string> needed(wanted.begin(), wanted.end());
  std::vector<const GraphNode*> plan;
  for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it) {
    if (!needed.count(it->output) || bindings.count(it->output)) continue;
    plan.push_back(&*it);
    needed.insert(it->inputs.begin(), it->inputs.end());
  }
  std::reverse(plan.begin(), plan.end());
  for (const auto& t : needed) {
    if (bindings.count(t)) continue;
    if (g.producer_of(t) == nullptr) {
      if (g.is_input(t)) throw InputError("missing input binding '" + t + "'");
      throw ConfigError("requested tensor '" + t + "' does not exist in the graph");
    }
  }

  std::map<std::string, int> uses;
  for (const auto* n : plan)
    for (const auto& in : n->inputs) ++uses[in];
  const std::set<std::string> keep(wanted.begin(), wanted.end());

  ExecResult result;
  auto record = [&](const std::string& name, const Value& v) {
    if (g.is_tap(name)) result.taps[name] = as_float(v);
    if (opts.observer && !is_quantized(v)) opts.observer(name, std::get<Tensor>(v));
  };
  for (const auto& [name, v] : bindings) record(name, v);

  detail::NodeRunner runner(g, opts.observer);
  for (const auto* n : plan) {
    std::vector<const Value*> in;
    in.reserve(n->inputs.size());
    for (const auto& name : n->inputs) in.push_back(&bindings.at(name));
    Value out;
    try {
      out = runner.run(*n, in);
    } catch (const ConfigError& e) {
      throw ConfigError("node '" + n->name + "': " + e.what());
    }
    record(n->output, out);
    bindings.insert_or_assign(n->output, std::move(out));
    for (const auto& name : n->inputs) {
      if (--uses[name] == 0 && !keep.count(name)) bindings.erase(name);
    }
  }
  for (const auto& name : wanted) {
    auto it = bindings.find(name);
    if (it == bindings.end()) throw InternalError("output '" + name + "' was not computed");
    result.values.insert_or_assign(name, it->second);
  }
  return result;
}

/// Float-only convenience: binds a single graph input, returns float outputs.
inline std::map<std::string, Tensor> execute_float(const ModelGraph& g, const std::string& input,
                                                   const Tensor& x,
                                                   std::vector<std::string> outputs = {}) {
  ValueMap b;
  b.emplace(input, x);
  auto r = execute(g, std::move(b), {std::move(outputs), {}});
  std::map<std::string, Tensor> out;
  for (auto& [k, v] : r.values) out.emplace(k, as_float(v));
  return out;
}

}  // namespace lightdense
