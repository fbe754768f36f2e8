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

// Latency benchmark and report.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lightdense/errors.hpp"

namespace lightdense {

struct BenchReport {
  std::vector<double> latencies;  // seconds, warmup excluded
  double mean = 0.0, p50 = 0.0, p90 = 0.0, fps = 0.0;
  int warmup = 0;
  int repeats = 0;
  int width = 0, height = 0;  // network input size of the first image
  int shortest_side = 0;
  std::string variant;
};

/// Linear interpolation between closest ranks; q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("percentile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

inline void summarize(BenchReport& r) {
  if (r.latencies.empty()) throw ConfigError("benchmark produced no samples");
  double sum = 0.0;
  for (double l : r.latencies) sum += l;
  r.mean = sum / static_cast<double>(r.latencies.size());
  r.p50 = percentile(r.latencies, 0.5);
  r.p90 = percentile(r.latencies, 0.9);
  r.fps = r.mean > 0 ? 1.0 / r.mean : 0.0;
}

/// Times run(i) for every item i, `repeats` passes, after `warmup` untimed
/// calls cycling over the items. Uses a monotonic clock.
inline BenchReport benchmark(std::size_t items, const std::function<void(std::size_t)>& run, int warmup,
                             int repeats) {
  if (items == 0) throw ConfigError("benchmark needs at least one image");
  if (repeats < 1) throw ConfigError("benchmark repeats must be at least 1");
  if (warmup < 0) throw ConfigError("benchmark warmup must be non-negative");
  BenchReport r;
  r.warmup = warmup;
  r.repeats = repeats;
  for (int i = 0; i < warmup; ++i) run(static_cast<std::size_t>(i) % items);
  using clock = std::chrono::steady_clock;
  for (int rep = 0; rep < repeats; ++rep) {
    for (std::size_t i = 0; i < items; ++i) {
      const auto t0 = clock::now();
      run(i);
      r.latencies.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
  }
  summarize(r);
  return r;
}

inline nlohmann::json to_json(const BenchReport& r) {
  return {{"latencies", r.latencies}, {"mean", r.mean},       {"p50", r.p50},
          {"p90", r.p90},             {"fps", r.fps},         {"warmup", r.warmup},
          {"repeats", r.repeats},     {"width", r.width},     {"height", r.height},
          {"shortest_side", r.shortest_side}, {"variant", r.variant}, {"samples", r.latencies.size()}};
}

}  // namespace lightdense
