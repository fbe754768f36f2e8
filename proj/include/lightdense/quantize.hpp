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

// Conv/BN/activation fusion, min/max calibration, and int8 conversion.

#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lightdense/errors.hpp"
#include "lightdense/execute.hpp"
#include "lightdense/graph.hpp"
#include "lightdense/qkernels.hpp"
#include "lightdense/qtensor.hpp"

namespace lightdense {

// Fusion -------------------------------------------------------------------

struct FoldedConv {
  Tensor weight;
  std::vector<float> bias;
};

/// W'_o = W_o * g_o / sqrt(v_o + eps); b'_o = (b_o - m_o) * g_o / sqrt(v_o + eps) + beta_o.
/// An empty bias is treated as zeros.
inline FoldedConv fold_bn_into_conv(const Tensor& w, std::span<const float> bias, std::span<const float> gamma,
                                    std::span<const float> beta, std::span<const float> mean,
                                    std::span<const float> var, float eps) {
  const auto out_c = static_cast<std::size_t>(w.n());
  if (gamma.size() != out_c || beta.size() != out_c || mean.size() != out_c || var.size() != out_c)
    throw ConfigError("batch norm has " + std::to_string(gamma.size()) + " channels, conv has " +
                      std::to_string(out_c));
  if (!bias.empty() && bias.size() != out_c) throw ConfigError("conv bias length mismatch");
  FoldedConv f{w, std::vector<float>(out_c)};
  const std::size_t per = out_c > 0 ? w.size() / out_c : 0;
  for (std::size_t o = 0; o < out_c; ++o) {
    if (var[o] < 0.0f) throw InputError("batch norm variance must be non-negative");
    const float k = gamma[o] / std::sqrt(var[o] + eps);
    for (std::size_t i = 0; i < per; ++i) f.weight[o * per + i] = w[o * per + i] * k;
    const float b = bias.empty() ? 0.0f : bias[o];
    f.bias[o] = (b - mean[o]) * k + beta[o];
  }
  return f;
}

inline void check_taps(const ModelGraph& g, const char* pass) {
  for (const auto& t : g.taps)
    if (!g.resolves(t)) throw InternalError(std::string(pass) + " lost tap '" + t + "'");
}

namespace detail {

struct FusionPlan {
  const GraphNode* bn = nullptr;
  const GraphNode* act = nullptr;
};

/// The single consumer of `t` if `t` may disappear inside a fused node.
inline const GraphNode* sole_private_consumer(const ModelGraph& g, const std::string& t) {
  if (g.is_tap(t) || g.is_output(t)) return nullptr;
  auto cs = g.consumers_of(t);
  return cs.size() == 1 ? cs.front() : nullptr;
}

}  // namespace detail

/// Collapses conv/linear [-> BN] [-> activation] chains into single nodes.
/// A chain stops at any intermediate that is tapped, is a graph output, or
/// has more than one consumer. BN is folded only into unshared convs; shared
/// convs absorb an activation only if every sharer can.
inline ModelGraph fuse_graph(const ModelGraph& g) {
  if (g.quantized) throw ConfigError("fuse_graph expects a float graph");
  g.validate();
  std::set<std::string> shared;
  for (const auto& n : g.nodes)
    if (!n.param_owner.empty()) {
      shared.insert(n.param_owner);
      shared.insert(n.name);
    }

  std::map<std::string, detail::FusionPlan> plans;
  for (const auto& n : g.nodes) {
    if (!is_conv_like(n.kind) && n.kind != OpKind::kLinear) continue;
    if (n.attrs.activation != Activation::kIdentity) continue;
    detail::FusionPlan p;
    std::string tail = n.output;
    if (!shared.count(n.name)) {
      if (const auto* c = detail::sole_private_consumer(g, tail); c && c->kind == OpKind::kBatchNorm) {
        p.bn = c;
        tail = c->output;
      }
    }
    if (const auto* c = detail::sole_private_consumer(g, tail); c && c->kind == OpKind::kActivation)
      p.act = c;
    plans[n.name] = p;
  }
  // Shared groups: all or none absorb the same activation.
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& n : g.nodes)
    if (shared.count(n.name)) groups[n.param_owner.empty() ? n.name : n.param_owner].push_back(n.name);
  for (const auto& [owner, members] : groups) {
    bool uniform = true;
    for (const auto& m : members) {
      const auto* a = plans[m].act;
      const auto* a0 = plans[members.front()].act;
      if ((a == nullptr) != (a0 == nullptr) || (a && a->attrs.activation != a0->attrs.activation)) uniform = false;
    }
    if (!uniform)
      for (const auto& m : members) plans[m].act = nullptr;
  }

  ModelGraph out;
  out.inputs = g.inputs;
  out.outputs = g.outputs;
  out.taps = g.taps;
  std::set<std::string> absorbed;
  for (const auto& [name, p] : plans) {
    if (p.bn) absorbed.insert(p.bn->name);
    if (p.act) absorbed.insert(p.act->name);
  }
  for (const auto& n : g.nodes) {
    if (absorbed.count(n.name)) continue;
    auto it = plans.find(n.name);
    if (it == plans.end() || (!it->second.bn && !it->second.act)) {
      out.nodes.push_back(n);
      continue;
    }
    const auto& p = it->second;
    GraphNode f = n;
    if (f.kind != OpKind::kLinear) f.kind = OpKind::kFusedConv;
    if (p.bn) {
      const auto& bn = *p.bn;
      auto folded = fold_bn_into_conv(n.params.at("weight"), detail::param_span(n, "bias"),
                                      detail::param_span(bn, "gamma"), detail::param_span(bn, "beta"),
                                      detail::param_span(bn, "running_mean"), detail::param_span(bn, "running_var"),
                                      bn.attrs.eps);
      f.params["weight"] = std::move(folded.weight);
      f.params["bias"] = Tensor({1, static_cast<int>(folded.bias.size()), 1, 1}, folded.bias);
      f.attrs.conv.has_bias = true;
      f.output = bn.output;
    }
    if (p.act) {
      f.attrs.activation = p.act->attrs.activation;
      f.output = p.act->output;
    }
    out.nodes.push_back(std::move(f));
  }
  out.fused = true;
  out.validate();
  check_taps(out, "fuse_graph");
  return out;
}

// Calibration --------------------------------------------------------------

struct Range {
  float min = std::numeric_limits<float>::infinity();
  float max = -std::numeric_limits<float>::infinity();
  void update(const Tensor& t) {
    for (float v : t.data()) {
      if (!std::isfinite(v)) continue;
      min = std::min(min, v);
      max = std::max(max, v);
    }
  }
  bool valid() const { return min <= max; }
};

/// Running per-tensor min/max.
struct Observer {
  std::map<std::string, Range> ranges;
  std::optional<Range> fallback;  // used for unobserved tensors when set

  void observe(const std::string& name, const Tensor& t) { ranges[name].update(t); }

  Range range_of(const std::string& name) const {
    auto it = ranges.find(name);
    if (it != ranges.end() && it->second.valid()) return it->second;
    if (fallback) return *fallback;
    throw ConfigError("no calibration statistics for tensor '" + name + "'");
  }
  QuantParams activation_qparams(const std::string& name) const {
    const Range r = range_of(name);
    return choose_qparams(r.min, r.max, QDType::kU8, false);
  }
};

/// Runs the whole float graph once per binding set, recording ranges.
inline Observer calibrate(const ModelGraph& g, const std::vector<ValueMap>& batches) {
  if (batches.empty()) throw ConfigError("calibration needs at least one input batch");
  if (g.quantized) throw ConfigError("calibrate expects a float graph");
  Observer obs;
  ExecOptions opts;
  opts.observer = [&obs](const std::string& name, const Tensor& t) { obs.observe(name, t); };
  for (const auto& b : batches) execute(g, b, opts);
  return obs;
}

// Conversion ---------------------------------------------------------------

inline bool has_integer_kernel(OpKind k) {
  switch (k) {
    case OpKind::kConv:
    case OpKind::kDepthwiseConv:
    case OpKind::kFusedConv:
    case OpKind::kLinear:
    case OpKind::kAdd:
    case OpKind::kWeightedSum:
    case OpKind::kConcat:
    case OpKind::kResize:
    case OpKind::kMaxPool:
    case OpKind::kGlobalAvgPool:
    case OpKind::kActivation: return true;
    default: return false;
  }
}

/// Ops whose output reuses the input quantization parameters.
inline bool passes_qparams_through(OpKind k) { return k == OpKind::kResize || k == OpKind::kMaxPool; }

inline bool is_roi_op(OpKind k) { return k == OpKind::kRoiAlign || k == OpKind::kMultiLevelRoiAlign; }

/// Rewrites a fused float graph into the quantized form:
///  - the image input is quantized by a Quantize node;
///  - ops with integer kernels run on u8 activations (i8 per-channel weights,
///    i32 biases);
///  - other ops (BN, channel scale, RoI pooling) run in float between a
///    Dequantize of each quantized input and a Quantize of the output;
///  - every graph output is produced by a Dequantize.
/// Tensor names, and therefore taps, are unchanged.
inline ModelGraph convert(const ModelGraph& g, const Observer& obs) {
  if (!g.fused) throw ConfigError("convert expects a fused graph (run fuse_graph first)");
  if (g.quantized) throw ConfigError("graph is already quantized");
  g.validate();
  const std::set<std::string> roi_inputs = [&] {
    std::set<std::string> s;
    for (const auto& n : g.nodes)
      if (is_roi_op(n.kind)) s.insert(n.inputs.front());
    return s;
  }();

  ModelGraph q;
  q.inputs = g.inputs;
  q.outputs = g.outputs;
  q.taps = g.taps;
  q.fused = true;
  q.quantized = true;

  std::map<std::string, std::string> current;  // logical tensor -> tensor carrying it in q
  std::map<std::string, QuantParams> qp_of;    // quantized tensors in q
  auto cur = [&](const std::string& t) {
    auto it = current.find(t);
    return it == current.end() ? t : it->second;
  };

  for (const auto& in : g.inputs) {
    if (roi_inputs.count(in)) continue;
    GraphNode qn;
    qn.name = in + ".quantize";
    qn.kind = OpKind::kQuantize;
    qn.inputs = {in};
    qn.output = in + ".q";
    qn.out_qparams = obs.activation_qparams(in);
    qp_of[qn.output] = *qn.out_qparams;
    current[in] = qn.output;
    q.nodes.push_back(std::move(qn));
  }

  const std::set<std::string> outputs(g.outputs.begin(), g.outputs.end());
  for (const auto& n : g.nodes) {
    const std::string final_name = outputs.count(n.output) ? n.output + ".q" : n.output;
    if (has_integer_kernel(n.kind)) {
      GraphNode m = n;
      for (auto& in : m.inputs) in = cur(in);
      m.output = final_name;
      for (const auto& in : m.inputs)
        if (!qp_of.count(in)) throw InternalError("node '" + n.name + "' has a non-quantized input '" + in + "'");
      if (passes_qparams_through(n.kind)) {
        qp_of[m.output] = qp_of.at(m.inputs.front());
      } else {
        m.out_qparams = obs.activation_qparams(n.output);
        qp_of[m.output] = *m.out_qparams;
      }
      const bool weighted = is_conv_like(n.kind) || n.kind == OpKind::kLinear;
      if (weighted) {
        if (!is_clamp_activation(n.attrs.activation)) m.preact_qparams = obs.activation_qparams(n.output + ".preact");
        const GraphNode& owner = g.params_node(n);
        const Tensor& w = owner.params.at("weight");
        const float s_x = qp_of.at(m.inputs.front()).scale[0];
        if (n.param_owner.empty()) m.qweight = quantize_weights_per_channel(w);
        const QuantParams w_qp = n.param_owner.empty() ? m.qweight->qparams : quantize_weights_per_channel(w).qparams;
        const auto bias = detail::param_span(owner, "bias");
        if (!bias.empty()) {
          m.qbias = quantize_bias(bias, s_x, w_qp);
          m.qbias_params = bias_qparams(s_x, w_qp);
        }
        m.params.erase("weight");
        m.params.erase("bias");
      }
      current[n.output] = m.output;
      q.nodes.push_back(std::move(m));
    } else if (n.kind == OpKind::kQuantize || n.kind == OpKind::kDequantize) {
      throw ConfigError("float graph already contains quantize/dequantize node '" + n.name + "'");
    } else {
      // Float island.
      GraphNode m = n;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const std::string src = cur(n.inputs[i]);
        if (!qp_of.count(src)) {
          m.inputs[i] = src;
          continue;
        }
        GraphNode dq;
        dq.name = n.name + ".dequantize" + std::to_string(i);
        dq.kind = OpKind::kDequantize;
        dq.inputs = {src};
        dq.output = dq.name;
        m.inputs[i] = dq.output;
        q.nodes.push_back(std::move(dq));
      }
      m.output = n.output + ".float";
      GraphNode qn;
      qn.name = n.name + ".quantize";
      qn.kind = OpKind::kQuantize;
      qn.inputs = {m.output};
      qn.output = final_name;
      qn.out_qparams = obs.activation_qparams(n.output);
      qp_of[qn.output] = *qn.out_qparams;
      current[n.output] = qn.output;
      q.nodes.push_back(std::move(m));
      q.nodes.push_back(std::move(qn));
    }
  }
  for (const auto& o : g.outputs) {
    GraphNode dq;
    dq.name = o + ".dequantize";
    dq.kind = OpKind::kDequantize;
    dq.inputs = {cur(o)};
    dq.output = o;
    q.nodes.push_back(std::move(dq));
  }
  q.validate();
  check_taps(q, "convert");
  return q;
}

/// Fused float graph + calibration batches -> quantized graph.
inline ModelGraph quantize_model(const ModelGraph& fused, const std::vector<ValueMap>& calibration) {
  if (!fused.fused) throw ConfigError("quantize_model expects a fused graph (run fuse_graph first)");
  return convert(fused, calibrate(fused, calibration));
}

/// Quantized graph skeleton for loading a quantized weight file: the
/// structure depends only on the float graph, the stored values replace the
/// placeholder parameters.
inline ModelGraph quantized_skeleton(const ModelGraph& float_graph) {
  Observer placeholder;
  placeholder.fallback = Range{-1.0f, 1.0f};
  return convert(float_graph.fused ? float_graph : fuse_graph(float_graph), placeholder);
}

}  // namespace lightdense
