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

// Model loading, seeded construction, calibration, and per-image inference.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lightdense/config.hpp"
#include "lightdense/eval.hpp"
#include "lightdense/image.hpp"
#include "lightdense/model.hpp"
#include "lightdense/pipeline.hpp"
#include "lightdense/quantize.hpp"
#include "lightdense/weights.hpp"

namespace lightdense {

/// True if the file holds int8 weights.
inline bool is_quantized_weight_file(std::span<const std::uint8_t> bytes) {
  for (const auto& e : decode_weight_entries(bytes))
    if (e.dtype == WeightDType::kI8) return true;
  return false;
}

/// Float graph with seeded random weights.
inline ModelGraph seeded_graph(const ModelConfig& cfg, std::uint64_t seed) {
  ModelGraph g = build_graph(cfg);
  initialize_weights(g, seed);
  return g;
}

/// Float or quantized graph for `cfg`, populated from a weight file.
inline ModelGraph load_graph(const ModelConfig& cfg, std::span<const std::uint8_t> bytes) {
  ModelGraph g = build_graph(cfg);
  if (is_quantized_weight_file(bytes)) g = quantized_skeleton(g);
  load_weights(g, bytes);
  return g;
}

/// Calibrates on prepared images (every proposal to the box head, the
/// `dp_rois` best to the DensePose head) and converts.
inline ModelGraph quantize_with_images(const ModelConfig& cfg, const ModelGraph& float_graph,
                                       const std::vector<PreparedInput>& images, int dp_rois = 16) {
  if (images.empty()) throw ConfigError("quantization needs at least one calibration image");
  const ModelGraph fused = float_graph.fused ? float_graph : fuse_graph(float_graph);
  const Detector det(cfg, fused);
  std::vector<ValueMap> batches;
  for (const auto& p : images)
    batches.push_back(det.full_bindings(p.tensor, static_cast<float>(p.resized_w), static_cast<float>(p.resized_h),
                                        dp_rois));
  return quantize_model(fused, batches);
}

/// Detections in original image coordinates.
inline std::vector<PersonResult> infer_image(const Detector& det, const PreparedInput& in) {
  auto res = det.run(in.tensor, static_cast<float>(in.resized_w), static_cast<float>(in.resized_h));
  rescale_results(res, in.scale_x, in.scale_y, static_cast<float>(in.original_w), static_cast<float>(in.original_h));
  return res;
}

inline std::vector<EvalPrediction> to_predictions(std::int64_t image_id, const std::vector<PersonResult>& res) {
  std::vector<EvalPrediction> out;
  for (const auto& r : res) out.push_back({image_id, r.detection.score, r.densepose});
  return out;
}

}  // namespace lightdense
