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

// End-to-end detector over a float or quantized model graph.

#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "lightdense/config.hpp"
#include "lightdense/detection.hpp"
#include "lightdense/execute.hpp"
#include "lightdense/model.hpp"

namespace lightdense {

/// Stage-1 products: pyramid values (float or quantized) and proposals.
struct ProposalStage {
  ValueMap pyramid;  // "p2".."p6"
  std::vector<ScoredBox> proposals;
  std::vector<std::vector<Box>> anchors;
};

/// Maps result boxes from network-input to original-image coordinates.
inline void rescale_results(std::vector<PersonResult>& results, float scale_x, float scale_y, float image_w,
                            float image_h) {
  for (auto& r : results) {
    Box& b = r.detection.box;
    b = clip_box({b.x1 / scale_x, b.y1 / scale_y, b.x2 / scale_x, b.y2 / scale_y}, image_w, image_h);
    r.densepose.box = b;
  }
}

class Detector {
 public:
  Detector(ModelConfig cfg, ModelGraph graph) : cfg_(std::move(cfg)), g_(std::move(graph)) { g_.validate(); }

  const ModelConfig& config() const { return cfg_; }
  const ModelGraph& graph() const { return g_; }

  /// Backbone, neck and RPN on a (1, 3, H, W) network input, then proposal
  /// selection. Boxes are clipped to (valid_w, valid_h).
  ProposalStage propose(const Tensor& image, float valid_w, float valid_h) const {
    check_image(image);
    std::vector<std::string> outs = rpn_output_names();
    for (int k = 2; k <= 6; ++k) outs.push_back(level_name(k));
    ValueMap in;
    in.emplace(kImageInput, image);
    auto r = execute(g_, std::move(in), {outs, {}});

    ProposalStage st;
    std::vector<LevelSize> sizes;
    for (int k = 2; k <= 6; ++k) {
      const Shape s = shape_of(r.values.at(level_name(k)));
      sizes.push_back({s.h, s.w});
    }
    st.anchors = generate_anchors(sizes, cfg_.rpn.anchor_scales, cfg_.rpn.aspect_ratios);
    std::vector<std::vector<ScoredBox>> levels;
    for (int k = 2; k <= 6; ++k) {
      const Tensor logits = as_float(r.values.at("rpn.logits." + level_name(k)));
      const Tensor deltas = as_float(r.values.at("rpn.deltas." + level_name(k)));
      levels.push_back(decode_rpn_level(logits, deltas, st.anchors[k - 2], cfg_.test.pre_nms_topk, valid_w, valid_h));
    }
    st.proposals = select_proposals(levels, {cfg_.test.pre_nms_topk, cfg_.test.proposals_per_level,
                                             cfg_.test.rpn_nms_iou});
    for (int k = 2; k <= 6; ++k) st.pyramid.emplace(level_name(k), std::move(r.values.at(level_name(k))));
    return st;
  }

  /// Box head on proposals, then post-processing.
  std::vector<Detection> detect_boxes(const ProposalStage& st, float valid_w, float valid_h) const {
    if (st.proposals.empty()) return {};
    std::vector<Box> boxes;
    for (const auto& p : st.proposals) boxes.push_back(p.box);
    ValueMap in;
    for (int k = 2; k <= 5; ++k) in.emplace(level_name(k), st.pyramid.at(level_name(k)));
    in.emplace(kBoxRoisInput, boxes_to_tensor(boxes));
    auto r = execute(g_, std::move(in), {{kBoxClsLogits, kBoxDeltas}, {}});
    return postprocess_boxes(boxes, as_float(r.values.at(kBoxClsLogits)), as_float(r.values.at(kBoxDeltas)),
                             valid_w, valid_h,
                             {cfg_.test.score_thresh, cfg_.test.final_nms_iou, cfg_.test.max_detections});
  }

  /// DensePose head on the final detections (P2 only).
  std::vector<PersonResult> densepose(const ProposalStage& st, const std::vector<Detection>& dets) const {
    if (dets.empty()) return {};
    std::vector<Box> boxes;
    for (const auto& d : dets) boxes.push_back(d.box);
    ValueMap in;
    in.emplace("p2", st.pyramid.at("p2"));
    in.emplace(kDensePoseRoisInput, boxes_to_tensor(boxes));
    auto r = execute(g_, std::move(in), {{kDpParts, kDpU, kDpV}, {}});
    const Tensor parts = as_float(r.values.at(kDpParts));
    const Tensor u = as_float(r.values.at(kDpU));
    const Tensor v = as_float(r.values.at(kDpV));
    std::vector<PersonResult> out;
    for (std::size_t k = 0; k < dets.size(); ++k)
      out.push_back({dets[k], decode_densepose(dets[k].box, parts, u, v, static_cast<int>(k))});
    return out;
  }

  /// Full pipeline; results are in network-input coordinates.
  std::vector<PersonResult> run(const Tensor& image, float valid_w, float valid_h) const {
    const auto st = propose(image, valid_w, valid_h);
    return densepose(st, detect_boxes(st, valid_w, valid_h));
  }

  /// Bindings for a whole-graph pass: every proposal goes to the box head,
  /// the `dp_rois` best proposals to the DensePose head.
  ValueMap full_bindings(const Tensor& image, float valid_w, float valid_h, int dp_rois) const {
    const auto st = propose(image, valid_w, valid_h);
    std::vector<Box> boxes;
    for (const auto& p : st.proposals) boxes.push_back(p.box);
    if (boxes.empty()) boxes.push_back({0, 0, valid_w, valid_h});
    std::vector<float> scores;
    for (const auto& p : st.proposals) scores.push_back(p.score);
    std::vector<Box> dp;
    for (auto i : order_by_score(scores)) {
      if (static_cast<int>(dp.size()) >= dp_rois) break;
      dp.push_back(boxes[i]);
    }
    if (dp.empty()) dp.push_back(boxes.front());
    ValueMap in;
    in.emplace(kImageInput, image);
    in.emplace(kBoxRoisInput, boxes_to_tensor(boxes));
    in.emplace(kDensePoseRoisInput, boxes_to_tensor(dp));
    return in;
  }

 private:
  static void check_image(const Tensor& image) {
    if (image.n() != 1 || image.c() != 3)
      throw InputError("detector expects a (1, 3, H, W) image, got " + to_string(image.shape()));
    if (image.h() % 32 != 0 || image.w() % 32 != 0)
      throw InputError("image size " + std::to_string(image.h()) + "x" + std::to_string(image.w()) +
                       " is not divisible by 32");
  }

  ModelConfig cfg_;
  ModelGraph g_;
};

}  // namespace lightdense
