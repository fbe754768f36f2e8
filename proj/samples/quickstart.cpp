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

// Builds model-B with seeded weights, runs it on a synthetic image and prints
// the detections.

#include <cstdio>

#include "lightdense/lightdense.hpp"

int main() {
  using namespace lightdense;
  const ModelConfig cfg = default_model_b();
  const Detector det(cfg, seeded_graph(cfg, 7));

  Image img(320, 256);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      std::uint8_t* p = img.pixel(x, y);
      p[0] = static_cast<std::uint8_t>(x * 255 / img.width);
      p[1] = static_cast<std::uint8_t>(y * 255 / img.height);
      p[2] = 96;
    }

  const auto results = infer_image(det, prepare_input(img, 256));
  std::printf("%zu detections\n", results.size());
  for (const auto& r : results) {
    const Box& b = r.detection.box;
    std::printf("  score %.3f box [%.1f %.1f %.1f %.1f]\n", r.detection.score, b.x1, b.y1, b.x2, b.y2);
  }
}
