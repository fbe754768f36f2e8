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

// Full detector graph assembly.

#pragma once

#include <string>
#include <vector>

#include "lightdense/backbone.hpp"
#include "lightdense/config.hpp"
#include "lightdense/detection.hpp"
#include "lightdense/graph.hpp"
#include "lightdense/neck.hpp"

namespace lightdense {

inline constexpr const char* kImageInput = "image";
inline constexpr const char* kBoxRoisInput = "rois_box";
inline constexpr const char* kDensePoseRoisInput = "rois_dp";

inline std::vector<std::string> rpn_output_names() {
  std::vector<std::string> out;
  for (int k = 2; k <= 6; ++k) {
    out.push_back("rpn.logits." + level_name(k));
    out.push_back("rpn.deltas." + level_name(k));
  }
  return out;
}

/// One graph with inputs "image", "rois_box" (K, 4, 1, 1) and "rois_dp"; the
/// pipeline evaluates it in three partial passes.
inline ModelGraph build_graph(const ModelConfig& cfg) {
  cfg.validate();
  ModelGraph g;
  GraphBuilder b(g);
  const std::string image = b.input(kImageInput);
  const std::string rois_box = b.input(kBoxRoisInput);
  const std::string rois_dp = b.input(kDensePoseRoisInput);

  FeatureNames f = emit_backbone(b, image, cfg.backbone);
  g.rename_tensor(f.c2, "c2");
  g.rename_tensor(f.c3, "c3");
  g.rename_tensor(f.c4, "c4");
  g.rename_tensor(f.c5, "c5");
  f = {"c2", "c3", "c4", "c5"};

  const auto in_c = feature_channels(cfg.backbone);
  const PyramidNames p = emit_neck(b, f, in_c, cfg.neck);
  emit_rpn(b, p, cfg.neck.channels, cfg.rpn);
  emit_box_head(b, rois_box, p, cfg.neck.channels, cfg.box);
  emit_densepose_head(b, rois_dp, p[0], cfg.neck.channels, cfg.densepose);

  for (const auto& o : rpn_output_names()) b.output(o);
  for (const char* o : {kBoxClsLogits, kBoxDeltas, kDpParts, kDpU, kDpV}) b.output(o);
  g.validate();
  return g;
}

}  // namespace lightdense
