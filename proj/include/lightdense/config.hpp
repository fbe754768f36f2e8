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

// Model configuration document: structs, JSON mapping, validation, and the
// two shipped variants.

#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lightdense/errors.hpp"
#include "lightdense/graph.hpp"
#include "lightdense/kernels.hpp"

namespace lightdense {

struct StageConfig {
  double expansion = 1.0;
  int kernel = 3;
  int stride = 1;
  int out_channels = 16;
  double se_ratio = 0.0;
  Activation activation = Activation::kRelu6;
  int repeats = 1;
};

struct BackboneConfig {
  int stem_channels = 16;
  Activation stem_activation = Activation::kRelu6;
  std::vector<StageConfig> stages;
};

enum class NeckType { kFpn, kBiFpn };

struct NeckConfig {
  NeckType type = NeckType::kBiFpn;
  int channels = 64;
  int repeats = 1;
  FusionKind fusion = FusionKind::kFastNormalized;
  Activation activation = Activation::kHardSwish;
};

struct RpnConfig {
  std::vector<float> anchor_scales{32, 64, 128, 256, 512};
  std::vector<float> aspect_ratios{0.5f, 1.0f, 2.0f};
  float predictor_init_std = 0.01f;
};

struct BoxHeadConfig {
  int channels = 64;
  int pooled = 7;
  int sampling_ratio = 2;
  int num_convs = 2;
  float cls_init_std = 0.01f;
  float delta_init_std = 0.001f;
};

struct DensePoseHeadConfig {
  int channels = 64;
  int pooled = 32;
  int sampling_ratio = 2;
  std::vector<int> aspp_rates{6, 12, 18};
  int num_convs = 4;
  int num_parts = 25;
  Activation activation = Activation::kRelu;
  float predictor_init_std = 0.01f;
};

struct TestConfig {
  int pre_nms_topk = 1000;
  int proposals_per_level = 100;
  float rpn_nms_iou = 0.3f;
  float score_thresh = 0.05f;
  float final_nms_iou = 0.5f;
  int max_detections = 100;
  int shortest_side = 512;
};

struct ModelConfig {
  std::string name = "model-b";
  BackboneConfig backbone;
  NeckConfig neck;
  RpnConfig rpn;
  BoxHeadConfig box;
  DensePoseHeadConfig densepose;
  TestConfig test;

  /// Pyramid levels P2..P6.
  static constexpr int kMinLevel = 2;
  static constexpr int kMaxLevel = 6;
  int num_anchors() const { return static_cast<int>(rpn.aspect_ratios.size()); }

  void validate() const;
};

/// Approximate Single-Path-style backbone.
inline BackboneConfig default_backbone() {
  using A = Activation;
  BackboneConfig b;
  b.stem_channels = 16;
  b.stem_activation = A::kRelu6;
  b.stages = {
      {1, 3, 1, 16, 0, A::kRelu6, 1},      {3, 3, 2, 24, 0, A::kRelu6, 3},
      {6, 5, 2, 40, 0, A::kRelu6, 1},      {3, 3, 1, 40, 0, A::kRelu6, 3},
      {6, 5, 2, 80, 0, A::kHardSwish, 1},  {3, 3, 1, 80, 0, A::kHardSwish, 3},
      {6, 5, 1, 96, 0, A::kHardSwish, 1},  {3, 5, 1, 96, 0, A::kHardSwish, 3},
      {6, 5, 2, 192, 0, A::kHardSwish, 4}, {6, 3, 1, 320, 0, A::kHardSwish, 1},
  };
  return b;
}

inline ModelConfig default_model_b() {
  ModelConfig c;
  c.name = "model-b";
  c.backbone = default_backbone();
  return c;
}

/// FPN at 256 channels with 256-channel heads on the same backbone.
inline ModelConfig default_model_a() {
  ModelConfig c = default_model_b();
  c.name = "model-a";
  c.neck.type = NeckType::kFpn;
  c.neck.channels = 256;
  c.neck.repeats = 0;
  c.box.channels = 256;
  c.densepose.channels = 256;
  return c;
}

/// Strides of the first block of each stage, cumulative (stem included).
inline std::vector<int> stage_output_strides(const BackboneConfig& b) {
  std::vector<int> out;
  int s = 2;
  for (const auto& st : b.stages) {
    s *= st.stride;
    out.push_back(s);
  }
  return out;
}

inline void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (backbone.stem_channels <= 0) fail("backbone.stem_channels must be positive");
  if (backbone.stages.empty()) fail("backbone.stages must not be empty");
  for (std::size_t i = 0; i < backbone.stages.size(); ++i) {
    const auto& s = backbone.stages[i];
    const std::string at = "backbone.stages[" + std::to_string(i) + "]";
    if (!(s.expansion > 0)) fail(at + ".expansion must be positive");
    if (s.kernel <= 0 || s.kernel % 2 == 0) fail(at + ".kernel must be a positive odd number");
    if (s.stride != 1 && s.stride != 2) fail(at + ".stride must be 1 or 2");
    if (s.out_channels <= 0) fail(at + ".out_channels must be positive");
    if (s.se_ratio < 0 || s.se_ratio > 1) fail(at + ".se_ratio must lie in [0, 1]");
    if (s.repeats <= 0) fail(at + ".repeats must be positive");
  }
  const auto strides = stage_output_strides(backbone);
  if (strides.back() != 32) fail("backbone strides must multiply to 32 including the stem");
  for (int want : {4, 8, 16, 32})
    if (std::find(strides.begin(), strides.end(), want) == strides.end())
      fail("backbone has no stage at stride " + std::to_string(want));
  if (neck.channels <= 0) fail("neck.channels must be positive");
  if (neck.repeats < 0) fail("neck.repeats must be non-negative");
  if (rpn.anchor_scales.size() != kMaxLevel - kMinLevel + 1)
    fail("rpn.anchor_scales needs one scale per level P2..P6");
  if (rpn.aspect_ratios.empty()) fail("rpn.aspect_ratios must not be empty");
  for (float s : rpn.anchor_scales)
    if (!(s > 0)) fail("rpn.anchor_scales must be positive");
  for (float r : rpn.aspect_ratios)
    if (!(r > 0)) fail("rpn.aspect_ratios must be positive");
  if (box.channels <= 0 || box.pooled <= 0 || box.sampling_ratio <= 0 || box.num_convs < 0)
    fail("heads.box fields must be positive");
  if (densepose.channels <= 0 || densepose.pooled <= 0 || densepose.sampling_ratio <= 0 ||
      densepose.num_convs < 0 || densepose.num_parts < 2)
    fail("heads.densepose fields must be positive");
  for (int r : densepose.aspp_rates)
    if (r <= 0) fail("heads.densepose.aspp_rates must be positive");
  if (test.pre_nms_topk <= 0 || test.proposals_per_level <= 0 || test.max_detections <= 0 ||
      test.shortest_side <= 0)
    fail("test counts must be positive");
  for (float v : {test.rpn_nms_iou, test.final_nms_iou, test.score_thresh})
    if (v < 0 || v > 1) fail("test thresholds must lie in [0, 1]");
}

namespace detail {

using nlohmann::json;

class JsonReader {
 public:
  JsonReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }
  /// Rejects keys that were never asked for.
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("config: unknown key '" + path_ + "." + k + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: '" + path_ + "." + key + "' has the wrong type");
    }
  }
  void activation(const char* key, Activation& out) {
    std::string s(to_string(out));
    get(key, s);
    out = parse_activation(s);
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Missing keys keep the model-B defaults; unknown keys are rejected.
inline ModelConfig parse_model_config(const nlohmann::json& j) {
  using detail::JsonReader;
  ModelConfig c = default_model_b();
  {
    JsonReader r(j, "$");
    r.get("name", c.name);
    if (const auto* b = r.child("backbone")) {
      JsonReader rb(*b, r.path("backbone"));
      rb.get("stem_channels", c.backbone.stem_channels);
      rb.activation("stem_activation", c.backbone.stem_activation);
      if (const auto* st = rb.child("stages")) {
        if (!st->is_array()) throw ConfigError("config: backbone.stages must be a list");
        c.backbone.stages.clear();
        for (std::size_t i = 0; i < st->size(); ++i) {
          StageConfig s;
          JsonReader rs((*st)[i], rb.path("stages") + "[" + std::to_string(i) + "]");
          rs.get("expansion", s.expansion);
          rs.get("kernel", s.kernel);
          rs.get("stride", s.stride);
          rs.get("out_channels", s.out_channels);
          rs.get("se_ratio", s.se_ratio);
          rs.activation("activation", s.activation);
          rs.get("repeats", s.repeats);
          rs.finish();
          c.backbone.stages.push_back(s);
        }
      }
      rb.finish();
    }
    if (const auto* n = r.child("neck")) {
      JsonReader rn(*n, r.path("neck"));
      std::string type = c.neck.type == NeckType::kFpn ? "fpn" : "bifpn";
      rn.get("type", type);
      if (type == "fpn") c.neck.type = NeckType::kFpn;
      else if (type == "bifpn") c.neck.type = NeckType::kBiFpn;
      else throw ConfigError("config: neck.type must be 'fpn' or 'bifpn', got '" + type + "'");
      rn.get("channels", c.neck.channels);
      rn.get("repeats", c.neck.repeats);
      std::string fusion(to_string(c.neck.fusion));
      rn.get("fusion", fusion);
      c.neck.fusion = parse_fusion_kind(fusion);
      rn.activation("activation", c.neck.activation);
      rn.finish();
    }
    if (const auto* p = r.child("rpn")) {
      JsonReader rp(*p, r.path("rpn"));
      rp.get("anchor_scales", c.rpn.anchor_scales);
      rp.get("aspect_ratios", c.rpn.aspect_ratios);
      rp.get("predictor_init_std", c.rpn.predictor_init_std);
      rp.finish();
    }
    if (const auto* h = r.child("heads")) {
      JsonReader rh(*h, r.path("heads"));
      if (const auto* b = rh.child("box")) {
        JsonReader rb(*b, rh.path("box"));
        rb.get("channels", c.box.channels);
        rb.get("pooled", c.box.pooled);
        rb.get("sampling_ratio", c.box.sampling_ratio);
        rb.get("num_convs", c.box.num_convs);
        rb.get("cls_init_std", c.box.cls_init_std);
        rb.get("delta_init_std", c.box.delta_init_std);
        rb.finish();
      }
      if (const auto* d = rh.child("densepose")) {
        JsonReader rd(*d, rh.path("densepose"));
        rd.get("channels", c.densepose.channels);
        rd.get("pooled", c.densepose.pooled);
        rd.get("sampling_ratio", c.densepose.sampling_ratio);
        rd.get("aspp_rates", c.densepose.aspp_rates);
        rd.get("num_convs", c.densepose.num_convs);
        rd.get("num_parts", c.densepose.num_parts);
        rd.activation("activation", c.densepose.activation);
        rd.get("predictor_init_std", c.densepose.predictor_init_std);
        rd.finish();
      }
      rh.finish();
    }
    if (const auto* t = r.child("test")) {
      JsonReader rt(*t, r.path("test"));
      rt.get("pre_nms_topk", c.test.pre_nms_topk);
      rt.get("proposals_per_level", c.test.proposals_per_level);
      rt.get("rpn_nms_iou", c.test.rpn_nms_iou);
      rt.get("score_thresh", c.test.score_thresh);
      rt.get("final_nms_iou", c.test.final_nms_iou);
      rt.get("max_detections", c.test.max_detections);
      rt.get("shortest_side", c.test.shortest_side);
      rt.finish();
    }
    r.finish();
  }
  c.validate();
  return c;
}

inline ModelConfig parse_model_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_model_config(j);
}

inline ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_config(ss.str());
}

inline nlohmann::json to_json(const ModelConfig& c) {
  using nlohmann::json;
  json stages = json::array();
  for (const auto& s : c.backbone.stages)
    stages.push_back({{"expansion", s.expansion},
                      {"kernel", s.kernel},
                      {"stride", s.stride},
                      {"out_channels", s.out_channels},
                      {"se_ratio", s.se_ratio},
                      {"activation", to_string(s.activation)},
                      {"repeats", s.repeats}});
  return {
      {"name", c.name},
      {"backbone",
       {{"stem_channels", c.backbone.stem_channels},
        {"stem_activation", to_string(c.backbone.stem_activation)},
        {"stages", stages}}},
      {"neck",
       {{"type", c.neck.type == NeckType::kFpn ? "fpn" : "bifpn"},
        {"channels", c.neck.channels},
        {"repeats", c.neck.repeats},
        {"fusion", to_string(c.neck.fusion)},
        {"activation", to_string(c.neck.activation)}}},
      {"rpn",
       {{"anchor_scales", c.rpn.anchor_scales},
        {"aspect_ratios", c.rpn.aspect_ratios},
        {"predictor_init_std", c.rpn.predictor_init_std}}},
      {"heads",
       {{"box",
         {{"channels", c.box.channels},
          {"pooled", c.box.pooled},
          {"sampling_ratio", c.box.sampling_ratio},
          {"num_convs", c.box.num_convs},
          {"cls_init_std", c.box.cls_init_std},
          {"delta_init_std", c.box.delta_init_std}}},
        {"densepose",
         {{"channels", c.densepose.channels},
          {"pooled", c.densepose.pooled},
          {"sampling_ratio", c.densepose.sampling_ratio},
          {"aspp_rates", c.densepose.aspp_rates},
          {"num_convs", c.densepose.num_convs},
          {"num_parts", c.densepose.num_parts},
          {"activation", to_string(c.densepose.activation)},
          {"predictor_init_std", c.densepose.predictor_init_std}}}}},
      {"test",
       {{"pre_nms_topk", c.test.pre_nms_topk},
        {"proposals_per_level", c.test.proposals_per_level},
        {"rpn_nms_iou", c.test.rpn_nms_iou},
        {"score_thresh", c.test.score_thresh},
        {"final_nms_iou", c.test.final_nms_iou},
        {"max_detections", c.test.max_detections},
        {"shortest_side", c.test.shortest_side}}},
  };
}

}  // namespace lightdense
