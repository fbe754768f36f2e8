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

// Anchors, RPN, proposal selection, box and DensePose heads, post-processing.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lightdense/backbone.hpp"
#include "lightdense/box.hpp"
#include "lightdense/config.hpp"
#include "lightdense/execute.hpp"
#include "lightdense/graph.hpp"
#include "lightdense/neck.hpp"

namespace lightdense {

// Anchors ------------------------------------------------------------------

/// Anchors of one level in (y, x, ratio) order: index (y * w + x) * A + a.
/// w = s * sqrt(r), h = s / sqrt(r), centered at ((x + 0.5) * stride, (y + 0.5) * stride).
inline std::vector<Box> generate_anchors(int h, int w, float stride, float scale,
                                         std::span<const float> ratios) {
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(h) * w * ratios.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float cx = (x + 0.5f) * stride, cy = (y + 0.5f) * stride;
      for (float r : ratios) {
        const float aw = scale * std::sqrt(r), ah = scale / std::sqrt(r);
        out.push_back({cx - 0.5f * aw, cy - 0.5f * ah, cx + 0.5f * aw, cy + 0.5f * ah});
      }
    }
  }
  return out;
}

struct LevelSize {
  int h = 0, w = 0;
};

/// One anchor list per level P2..P6 (stride 2^level, one scale per level).
inline std::vector<std::vector<Box>> generate_anchors(std::span<const LevelSize> sizes,
                                                      std::span<const float> scales,
                                                      std::span<const float> ratios,
                                                      int min_level = 2) {
  if (sizes.size() != scales.size()) throw ConfigError("one anchor scale per level required");
  std::vector<std::vector<Box>> out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const float stride = static_cast<float>(1 << (min_level + static_cast<int>(i)));
    out.push_back(generate_anchors(sizes[i].h, sizes[i].w, stride, scales[i], ratios));
  }
  return out;
}

// NMS and proposals ----------------------------------------------------------

struct ScoredBox {
  Box box;
  float score = 0.0f;
};

/// Indices sorted by descending score; ties keep the lower index first.
inline std::vector<std::size_t> order_by_score(std::span<const float> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

/// Greedy NMS. A box is dropped when its IoU with an already kept box
/// exceeds `iou_threshold`. Returns kept indices in selection order.
inline std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const float> scores,
                                    double iou_threshold, std::size_t max_keep = SIZE_MAX) {
  if (boxes.size() != scores.size()) throw ConfigError("nms: boxes/scores length mismatch");
  std::vector<std::size_t> keep;
  std::vector<char> removed(boxes.size(), 0);
  for (std::size_t i : order_by_score(scores)) {
    if (keep.size() >= max_keep) break;
    if (removed[i]) continue;
    keep.push_back(i);
    for (std::size_t j = 0; j < boxes.size(); ++j)
      if (!removed[j] && j != i && iou(boxes[i], boxes[j]) > iou_threshold) removed[j] = 1;
  }
  return keep;
}

inline std::vector<std::size_t> nms(std::span<const ScoredBox> items, double iou_threshold,
                                    std::size_t max_keep = SIZE_MAX) {
  std::vector<Box> b;
  std::vector<float> s;
  for (const auto& it : items) {
    b.push_back(it.box);
    s.push_back(it.score);
  }
  return nms(b, s, iou_threshold, max_keep);
}

struct ProposalParams {
  int pre_nms_topk = 1000;
  int post_nms_per_level = 100;
  float iou = 0.3f;
};

/// Per level: top-k by score, NMS, keep at most post_nms_per_level;
/// levels concatenated in order.
inline std::vector<ScoredBox> select_proposals(const std::vector<std::vector<ScoredBox>>& levels,
                                               const ProposalParams& p) {
  std::vector<ScoredBox> out;
  for (const auto& lvl : levels) {
    std::vector<float> scores;
    for (const auto& s : lvl) scores.push_back(s.score);
    auto order = order_by_score(scores);
    if (order.size() > static_cast<std::size_t>(p.pre_nms_topk)) order.resize(p.pre_nms_topk);
    std::vector<ScoredBox> top;
    for (auto i : order) top.push_back(lvl[i]);
    for (auto k : nms(top, p.iou, static_cast<std::size_t>(p.post_nms_per_level))) out.push_back(top[k]);
  }
  return out;
}

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

/// Scores every anchor of one level from RPN maps (batch item `n`), keeps
/// the top-k, and decodes them clipped to the image.
inline std::vector<ScoredBox> decode_rpn_level(const Tensor& logits, const Tensor& deltas,
                                               std::span<const Box> anchors, int pre_nms_topk,
                                               float image_w, float image_h, int n = 0) {
  const int a_count = logits.c(), h = logits.h(), w = logits.w();
  if (deltas.c() != 4 * a_count || deltas.h() != h || deltas.w() != w)
    throw ConfigError("rpn delta map shape " + to_string(deltas.shape()) + " does not match logits " +
                      to_string(logits.shape()));
  if (anchors.size() != static_cast<std::size_t>(h) * w * a_count)
    throw ConfigError("anchor count does not match rpn map size");
  std::vector<float> scores(anchors.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int a = 0; a < a_count; ++a)
        scores[(static_cast<std::size_t>(y) * w + x) * a_count + a] = sigmoid(logits.at(n, a, y, x));
  auto order = order_by_score(scores);
  if (order.size() > static_cast<std::size_t>(pre_nms_topk)) order.resize(pre_nms_topk);
  std::vector<ScoredBox> out;
  out.reserve(order.size());
  for (auto i : order) {
    const int a = static_cast<int>(i % a_count);
    const int cell = static_cast<int>(i / a_count);
    const int y = cell / w, x = cell % w;
    const BoxDelta d{deltas.at(n, 4 * a, y, x), deltas.at(n, 4 * a + 1, y, x), deltas.at(n, 4 * a + 2, y, x),
                     deltas.at(n, 4 * a + 3, y, x)};
    out.push_back({decode_deltas(anchors[i], d, image_w, image_h), scores[i]});
  }
  return out;
}

// Head emitters ------------------------------------------------------------

struct RpnNames {
  std::array<std::string, kPyramidLevels> logits, deltas;
};

/// Shared 3x3 conv + relu, then 1x1 objectness (A) and 1x1 deltas (4A);
/// weights owned by the P2 nodes and shared by every other level.
inline RpnNames emit_rpn(GraphBuilder& b, const PyramidNames& p, int channels, const RpnConfig& cfg) {
  const int a = static_cast<int>(cfg.aspect_ratios.size());
  RpnNames out;
  for (int i = 0; i < kPyramidLevels; ++i) {
    const std::string lv = "." + level_name(i + 2);
    std::string t;
    if (i == 0) {
      t = b.conv("rpn.conv" + lv, p[i], dense_spec(channels, channels, 3, 1, 1, true));
      t = b.activation("rpn.act" + lv, t, Activation::kRelu);
      out.logits[i] = b.conv("rpn.logits" + lv, t, pointwise_spec(channels, a, true), cfg.predictor_init_std);
      out.deltas[i] = b.conv("rpn.deltas" + lv, t, pointwise_spec(channels, 4 * a, true), cfg.predictor_init_std);
    } else {
      t = b.shared_conv("rpn.conv" + lv, p[i], "rpn.conv.p2");
      t = b.activation("rpn.act" + lv, t, Activation::kRelu);
      out.logits[i] = b.shared_conv("rpn.logits" + lv, t, "rpn.logits.p2");
      out.deltas[i] = b.shared_conv("rpn.deltas" + lv, t, "rpn.deltas.p2");
    }
  }
  return out;
}

inline constexpr const char* kBoxClsLogits = "box.cls_logits";
inline constexpr const char* kBoxDeltas = "box.deltas";
inline constexpr const char* kDpParts = "dp.parts";
inline constexpr const char* kDpU = "dp.u";
inline constexpr const char* kDpV = "dp.v";

/// num_convs x (3x3 conv + relu) -> flatten -> linear cls (2) and deltas (4).
inline void emit_box_head_from_pooled(GraphBuilder& b, const std::string& pooled, int in_channels,
                                      const BoxHeadConfig& cfg) {
  std::string t = pooled;
  int c = in_channels;
  for (int i = 0; i < cfg.num_convs; ++i) {
    const std::string k = std::to_string(i + 1);
    t = b.conv("box.conv" + k, t, dense_spec(c, cfg.channels, 3, 1, 1, true));
    t = b.activation("box.act" + k, t, Activation::kRelu);
    c = cfg.channels;
  }
  const int features = c * cfg.pooled * cfg.pooled;
  b.linear(kBoxClsLogits, t, features, 2, cfg.cls_init_std);
  b.linear(kBoxDeltas, t, features, 4, cfg.delta_init_std);
}

/// Multi-level RoIAlign over P2..P5 then the box head.
inline void emit_box_head(GraphBuilder& b, const std::string& rois, const PyramidNames& p, int channels,
                          const BoxHeadConfig& cfg) {
  const std::string pooled = b.multilevel_roi_align("box.pool", rois, {p[0], p[1], p[2], p[3]}, 2,
                                                    cfg.pooled, cfg.sampling_ratio);
  emit_box_head_from_pooled(b, pooled, channels, cfg);
}

/// ASPP (1x1, dilated 3x3s, image-level branch) -> 1x1 project -> num_convs
/// 3x3 convs -> three 1x1 predictors (parts, U, V).
inline void emit_densepose_head_from_pooled(GraphBuilder& b, const std::string& pooled, int in_channels,
                                            const DensePoseHeadConfig& cfg) {
  const int c = cfg.channels;
  const Activation act = cfg.activation;
  std::vector<std::string> branches;
  branches.push_back(b.conv_bn_act("dp.aspp.b0", pooled, pointwise_spec(in_channels, c), act));
  for (std::size_t i = 0; i < cfg.aspp_rates.size(); ++i) {
    const int r = cfg.aspp_rates[i];
    branches.push_back(b.conv_bn_act("dp.aspp.b" + std::to_string(i + 1), pooled,
                                     dense_spec(in_channels, c, 3, 1, r), act));
  }
  std::string g = b.global_avg_pool("dp.aspp.gap", pooled);
  g = b.conv_bn_act("dp.aspp.image", g, pointwise_spec(in_channels, c), act);
  branches.push_back(b.resize_like("dp.aspp.image_up", g, branches.front()));
  const int cat_c = c * static_cast<int>(branches.size());
  std::string t = b.concat("dp.aspp.cat", std::move(branches));
  t = b.conv_bn_act("dp.aspp.proj", t, pointwise_spec(cat_c, c), act);
  for (int i = 0; i < cfg.num_convs; ++i)
    t = b.conv_bn_act("dp.conv" + std::to_string(i + 1), t, dense_spec(c, c, 3), act);
  for (const char* name : {kDpParts, kDpU, kDpV})
    b.conv(name, t, pointwise_spec(c, cfg.num_parts, true), cfg.predictor_init_std);
}

/// RoIAlign from P2 (scale 1/4) then the DensePose head.
inline void emit_densepose_head(GraphBuilder& b, const std::string& rois, const std::string& p2, int channels,
                                const DensePoseHeadConfig& cfg) {
  RoiAlignParams rp;
  rp.output_size = cfg.pooled;
  rp.sampling_ratio = cfg.sampling_ratio;
  rp.spatial_scale = 0.25f;
  const std::string pooled = b.roi_align("dp.pool", rois, p2, rp);
  emit_densepose_head_from_pooled(b, pooled, channels, cfg);
}

/// Standalone graphs for head-level tests and tools.
inline ModelGraph build_rpn_graph(int channels, const RpnConfig& cfg) {
  ModelGraph g;
  GraphBuilder b(g);
  PyramidNames p;
  for (int i = 0; i < kPyramidLevels; ++i) p[i] = b.input(level_name(i + 2));
  const auto r = emit_rpn(b, p, channels, cfg);
  for (int i = 0; i < kPyramidLevels; ++i) {
    b.output(r.logits[i]);
    b.output(r.deltas[i]);
  }
  g.validate();
  return g;
}

inline ModelGraph build_box_head_graph(int channels, const BoxHeadConfig& cfg) {
  ModelGraph g;
  GraphBuilder b(g);
  emit_box_head_from_pooled(b, b.input("pooled"), channels, cfg);
  b.output(kBoxClsLogits);
  b.output(kBoxDeltas);
  g.validate();
  return g;
}

inline ModelGraph build_densepose_head_graph(int channels, const DensePoseHeadConfig& cfg) {
  ModelGraph g;
  GraphBuilder b(g);
  emit_densepose_head_from_pooled(b, b.input("pooled"), channels, cfg);
  for (const char* n : {kDpParts, kDpU, kDpV}) b.output(n);
  g.validate();
  return g;
}

struct RpnLevelOutput {
  Tensor logits, deltas;
};

inline std::vector<RpnLevelOutput> rpn_forward(const Pyramid& p, const ModelGraph& rpn_graph) {
  ValueMap in;
  for (int i = 0; i < kPyramidLevels; ++i) in.emplace(level_name(i + 2), p.levels[i]);
  auto r = execute(rpn_graph, std::move(in));
  std::vector<RpnLevelOutput> out;
  for (int i = 0; i < kPyramidLevels; ++i) {
    const std::string lv = "." + level_name(i + 2);
    out.push_back({as_float(r.values.at("rpn.logits" + lv)), as_float(r.values.at("rpn.deltas" + lv))});
  }
  return out;
}

struct BoxHeadOutput {
  Tensor cls_logits;  // (K, 2, 1, 1): background, person
  Tensor deltas;      // (K, 4, 1, 1)
};

inline BoxHeadOutput box_head_forward(const Tensor& pooled, const ModelGraph& head) {
  auto out = execute_float(head, "pooled", pooled);
  return {out.at(kBoxClsLogits), out.at(kBoxDeltas)};
}

struct DensePoseHeadOutput {
  Tensor parts, u, v;  // each (K, 25, S, S)
};

inline DensePoseHeadOutput densepose_head_forward(const Tensor& pooled, const ModelGraph& head) {
  auto out = execute_float(head, "pooled", pooled);
  return {out.at(kDpParts), out.at(kDpU), out.at(kDpV)};
}

// Post-processing ----------------------------------------------------------

struct Detection {
  Box box;
  float score = 0.0f;
  int label = 0;  // person
};

/// Part index (0 background, 1..24 charts) and (u, v) on an S x S grid
/// spanning `box`, row-major.
struct DensePoseResult {
  Box box;
  int size = 32;
  std::vector<std::uint8_t> parts;
  std::vector<float> u, v;
};

struct PersonResult {
  Detection detection;
  DensePoseResult densepose;
};

/// Softmax probability of the person class for each row of (K, 2, 1, 1).
inline std::vector<float> person_scores(const Tensor& cls_logits) {
  if (cls_logits.c() != 2) throw ConfigError("box classifier must have 2 logits");
  std::vector<float> s(cls_logits.n());
  for (int k = 0; k < cls_logits.n(); ++k) {
    const float l0 = cls_logits.at(k, 0, 0, 0), l1 = cls_logits.at(k, 1, 0, 0);
    s[k] = 1.0f / (1.0f + std::exp(l0 - l1));
  }
  return s;
}

struct PostprocessParams {
  float score_thresh = 0.05f;
  float nms_iou = 0.5f;
  int max_detections = 100;
};

/// Refines proposals with the box-head deltas, clips to the image, drops
/// scores <= score_thresh, runs NMS and caps the count. Output is in
/// descending score order.
inline std::vector<Detection> postprocess_boxes(std::span<const Box> proposals, const Tensor& cls_logits,
                                                const Tensor& deltas, float image_w, float image_h,
                                                const PostprocessParams& p) {
  if (cls_logits.n() != static_cast<int>(proposals.size()) || deltas.n() != cls_logits.n() || deltas.c() != 4)
    throw ConfigError("box head outputs do not match the proposal count");
  const auto scores = person_scores(cls_logits);
  std::vector<Box> boxes;
  std::vector<float> kept_scores;
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    if (!(scores[k] > p.score_thresh)) continue;
    const BoxDelta d{deltas.at(k, 0, 0, 0), deltas.at(k, 1, 0, 0), deltas.at(k, 2, 0, 0), deltas.at(k, 3, 0, 0)};
    boxes.push_back(decode_deltas(proposals[k], d, image_w, image_h));
    kept_scores.push_back(scores[k]);
  }
  std::vector<Detection> out;
  for (auto i : nms(boxes, kept_scores, p.nms_iou, static_cast<std::size_t>(p.max_detections)))
    out.push_back({boxes[i], kept_scores[i], 0});
  return out;
}

/// Per pixel: part = argmax of the part logits; (u, v) read from that channel,
/// clamped to [0, 1].
inline DensePoseResult decode_densepose(const Box& box, const Tensor& parts, const Tensor& u, const Tensor& v,
                                        int k) {
  if (parts.shape() != u.shape() || parts.shape() != v.shape())
    throw ConfigError("densepose part/U/V maps differ in shape");
  if (parts.h() != parts.w()) throw ConfigError("densepose maps must be square");
  DensePoseResult r;
  r.box = box;
  r.size = parts.h();
  const int s = r.size, cells = s * s;
  r.parts.resize(cells);
  r.u.resize(cells);
  r.v.resize(cells);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      int best = 0;
      for (int c = 1; c < parts.c(); ++c)
        if (parts.at(k, c, y, x) > parts.at(k, best, y, x)) best = c;
      const int i = y * s + x;
      r.parts[i] = static_cast<std::uint8_t>(best);
      r.u[i] = std::clamp(u.at(k, best, y, x), 0.0f, 1.0f);
      r.v[i] = std::clamp(v.at(k, best, y, x), 0.0f, 1.0f);
    }
  }
  return r;
}

}  // namespace lightdense
