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

// Box AP and GPS-based DensePose AP over DensePose-COCO style annotations.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lightdense/box.hpp"
#include "lightdense/detection.hpp"
#include "lightdense/errors.hpp"

namespace lightdense {

/// Chart index (1..24) and surface coordinates.
struct Triplet {
  int c = 0;
  float u = 0.0f, v = 0.0f;
};

/// Annotated point in image coordinates.
struct DpPoint {
  float x = 0.0f, y = 0.0f;
  Triplet t;
};

struct EvalImage {
  std::int64_t id = 0;
  int width = 0, height = 0;
  std::string file_name;
};

struct EvalInstance {
  std::int64_t image_id = 0;
  Box box;
  std::vector<DpPoint> points;
};

struct EvalDataset {
  std::vector<EvalImage> images;
  std::vector<EvalInstance> instances;
};

/// One predicted person.
struct EvalPrediction {
  std::int64_t image_id = 0;
  float score = 0.0f;
  DensePoseResult dp;  // dp.box is the detection box
};

// Geodesic providers ---------------------------------------------------------

using GeodesicFn = std::function<double(const Triplet& gt, const Triplet& pred)>;

inline constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

/// +inf across charts, alpha * euclidean (u, v) distance within a chart.
inline double surrogate_geodesic(const Triplet& a, const Triplet& b, double alpha = 1.0) {
  if (a.c != b.c) return kInfiniteDistance;
  return alpha * std::hypot(static_cast<double>(a.u) - b.u, static_cast<double>(a.v) - b.v);
}

/// Chart-pair lookup: same chart uses alpha[c] * euclidean distance, chart
/// pairs use a fixed distance (null = unreachable). JSON:
///   {"alpha": [24 numbers], "distance": [[24 x 24 numbers or null]]}
class ChartPairTable {
 public:
  static constexpr int kCharts = 24;

  static ChartPairTable from_json(const nlohmann::json& j) {
    ChartPairTable t;
    try {
      const auto& alpha = j.at("alpha");
      const auto& dist = j.at("distance");
      if (alpha.size() != kCharts || dist.size() != kCharts) throw ConfigError("chart table must be 24 x 24");
      for (int i = 0; i < kCharts; ++i) {
        t.alpha_[i] = alpha[i].get<double>();
        if (dist[i].size() != kCharts) throw ConfigError("chart table must be 24 x 24");
        for (int k = 0; k < kCharts; ++k)
          t.dist_[i][k] = dist[i][k].is_null() ? kInfiniteDistance : dist[i][k].get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid chart table: ") + e.what());
    }
    return t;
  }

  static ChartPairTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open chart table '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("chart table is not valid JSON: ") + e.what());
    }
  }

  double operator()(const Triplet& a, const Triplet& b) const {
    if (a.c < 1 || a.c > kCharts || b.c < 1 || b.c > kCharts) return kInfiniteDistance;
    if (a.c == b.c) return surrogate_geodesic(a, b, alpha_[a.c - 1]);
    return dist_[a.c - 1][b.c - 1];
  }

 private:
  std::array<double, kCharts> alpha_{};
  std::array<std::array<double, kCharts>, kCharts> dist_{};
};

struct GpsParams {
  double kappa = 0.255;
  GeodesicFn provider = [](const Triplet& a, const Triplet& b) { return surrogate_geodesic(a, b); };
};

/// Predicted triplet at an image location, if it lies inside the box and
/// on a foreground cell of the S x S grid.
inline std::optional<Triplet> predicted_triplet(const DensePoseResult& pred, float x, float y) {
  const Box& b = pred.box;
  if (!(x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2)) return std::nullopt;
  const int s = pred.size;
  const int gx = std::min(s - 1, static_cast<int>(std::floor((x - b.x1) / (b.x2 - b.x1) * s)));
  const int gy = std::min(s - 1, static_cast<int>(std::floor((y - b.y1) / (b.y2 - b.y1) * s)));
  const int i = gy * s + gx;
  if (pred.parts[i] == 0) return std::nullopt;
  return Triplet{pred.parts[i], pred.u[i], pred.v[i]};
}

/// Mean over annotated points of exp(-g^2 / (2 kappa^2)). Points outside the
/// predicted box or on predicted background contribute 0.
inline double gps(const EvalInstance& gt, const DensePoseResult& pred, const GpsParams& p = {}) {
  if (gt.points.empty()) return 0.0;
  double total = 0.0;
  for (const auto& pt : gt.points) {
    const auto t = predicted_triplet(pred, pt.x, pt.y);
    if (!t) continue;
    const double g = p.provider(pt.t, *t);
    if (std::isfinite(g)) total += std::exp(-g * g / (2.0 * p.kappa * p.kappa));
  }
  return total / static_cast<double>(gt.points.size());
}

// Matching and AP ------------------------------------------------------------

struct MatchResult {
  std::vector<bool> pred_tp;     // per prediction, in input order
  std::vector<bool> gt_matched;  // per ground truth
};

/// Greedy matching. Predictions are visited in the given order (expected to
/// be descending score); each takes the unmatched ground truth of highest
/// similarity >= threshold (ties: lower index).
inline MatchResult greedy_match(const std::vector<std::vector<double>>& sim, std::size_t num_gt, double threshold) {
  MatchResult r;
  r.pred_tp.assign(sim.size(), false);
  r.gt_matched.assign(num_gt, false);
  for (std::size_t p = 0; p < sim.size(); ++p) {
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < num_gt; ++g) {
      if (r.gt_matched[g] || sim[p][g] < threshold) continue;
      if (!best || sim[p][g] > sim[p][*best]) best = g;
    }
    if (best) {
      r.gt_matched[*best] = true;
      r.pred_tp[p] = true;
    }
  }
  return r;
}

struct ScoredFlag {
  double score = 0.0;
  bool tp = false;
};

/// 101-point interpolated AP. Flags are ordered by descending score (stable
/// in input order). No ground truth: absent.
inline std::optional<double> average_precision(std::vector<ScoredFlag> flags, std::size_t total_gt) {
  if (total_gt == 0) return std::nullopt;
  std::stable_sort(flags.begin(), flags.end(), [](const ScoredFlag& a, const ScoredFlag& b) { return a.score > b.score; });
  const std::size_t n = flags.size();
  std::vector<double> precision(n), recall(n);
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (flags[i].tp ? tp : fp) += 1;
    precision[i] = tp / (tp + fp);
    recall[i] = tp / static_cast<double>(total_gt);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

/// {0.50, 0.55, ..., 0.95}.
inline std::vector<double> ap_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

struct ApReport {
  std::optional<double> ap;  // mean over thresholds
  std::vector<std::pair<double, std::optional<double>>> per_threshold;
};

struct EvalReport {
  ApReport box;
  ApReport densepose;
  std::size_t images = 0, instances = 0, dp_instances = 0, predictions = 0;
};

enum class Similarity { kIou, kGps };

/// AP over `thresholds` with per-image greedy matching.
inline ApReport evaluate_ap(const EvalDataset& ds, const std::vector<EvalPrediction>& preds, Similarity kind,
                            const GpsParams& gp = {}, const std::vector<double>& thresholds = ap_thresholds()) {
  std::map<std::int64_t, std::vector<const EvalInstance*>> gts;
  std::map<std::int64_t, std::vector<const EvalPrediction*>> by_img;
  std::size_t total_gt = 0;
  for (const auto& img : ds.images) {
    gts[img.id];
    by_img[img.id];
  }
  for (const auto& g : ds.instances) {
    if (kind == Similarity::kGps && g.points.empty()) continue;
    gts[g.image_id].push_back(&g);
    ++total_gt;
  }
  for (const auto& p : preds) by_img[p.image_id].push_back(&p);

  // Similarity matrices are threshold independent.
  struct PerImage {
    std::vector<const EvalPrediction*> preds;
    std::vector<std::vector<double>> sim;
    std::size_t num_gt = 0;
  };
  std::vector<PerImage> work;
  for (auto& [id, ps] : by_img) {
    PerImage w;
    w.preds = ps;
    std::stable_sort(w.preds.begin(), w.preds.end(), [](auto* a, auto* b) { return a->score > b->score; });
    const auto& g = gts[id];
    w.num_gt = g.size();
    for (const auto* p : w.preds) {
      std::vector<double> row;
      for (const auto* gi : g) row.push_back(kind == Similarity::kIou ? iou(p->dp.box, gi->box) : gps(*gi, p->dp, gp));
      w.sim.push_back(std::move(row));
    }
    work.push_back(std::move(w));
  }

  ApReport rep;
  double sum = 0.0;
  bool any = false;
  for (double t : thresholds) {
    std::vector<ScoredFlag> flags;
    for (const auto& w : work) {
      const auto m = greedy_match(w.sim, w.num_gt, t);
      for (std::size_t i = 0; i < w.preds.size(); ++i) flags.push_back({w.preds[i]->score, m.pred_tp[i]});
    }
    const auto ap = average_precision(std::move(flags), total_gt);
    rep.per_threshold.emplace_back(t, ap);
    if (ap) {
      sum += *ap;
      any = true;
    }
  }
  if (any) rep.ap = sum / static_cast<double>(thresholds.size());
  return rep;
}

inline EvalReport evaluate(const EvalDataset& ds, const std::vector<EvalPrediction>& preds, const GpsParams& gp = {}) {
  EvalReport r;
  r.box = evaluate_ap(ds, preds, Similarity::kIou, gp);
  r.densepose = evaluate_ap(ds, preds, Similarity::kGps, gp);
  r.images = ds.images.size();
  r.instances = ds.instances.size();
  for (const auto& i : ds.instances)
    if (!i.points.empty()) ++r.dp_instances;
  r.predictions = preds.size();
  return r;
}

/// Images with at most k annotated people, and their annotations.
inline EvalDataset filter_by_people(const EvalDataset& ds, int k) {
  if (k < 1) throw ConfigError("max people must be at least 1");
  std::map<std::int64_t, int> count;
  for (const auto& i : ds.instances) ++count[i.image_id];
  EvalDataset out;
  for (const auto& img : ds.images)
    if (count[img.id] <= k) out.images.push_back(img);
  for (const auto& i : ds.instances)
    if (count[i.image_id] <= k) out.instances.push_back(i);
  return out;
}

// JSON ---------------------------------------------------------------------

/// DensePose-COCO annotations; dp_x / dp_y are box-relative on a 0..256 scale.
inline EvalDataset parse_annotations(const nlohmann::json& j) {
  EvalDataset ds;
  try {
    for (const auto& im : j.at("images")) {
      EvalImage e;
      e.id = im.at("id").get<std::int64_t>();
      e.width = im.value("width", 0);
      e.height = im.value("height", 0);
      e.file_name = im.value("file_name", "");
      ds.images.push_back(std::move(e));
    }
    for (const auto& a : j.at("annotations")) {
      EvalInstance inst;
      inst.image_id = a.at("image_id").get<std::int64_t>();
      const auto bb = a.at("bbox").get<std::vector<float>>();
      if (bb.size() != 4) throw InputError("annotation bbox must have 4 numbers");
      inst.box = Box::from_xywh(bb[0], bb[1], bb[2], bb[3]);
      if (a.contains("dp_x")) {
        const auto xs = a.at("dp_x").get<std::vector<float>>();
        const auto ys = a.at("dp_y").get<std::vector<float>>();
        const auto is = a.at("dp_I").get<std::vector<float>>();
        const auto us = a.at("dp_U").get<std::vector<float>>();
        const auto vs = a.at("dp_V").get<std::vector<float>>();
        if (ys.size() != xs.size() || is.size() != xs.size() || us.size() != xs.size() || vs.size() != xs.size())
          throw InputError("annotation dp_* arrays differ in length");
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const int c = static_cast<int>(std::lround(is[i]));
          if (c < 1 || c > 24) throw InputError("dp_I chart index out of range: " + std::to_string(c));
          inst.points.push_back({bb[0] + xs[i] / 256.0f * bb[2], bb[1] + ys[i] / 256.0f * bb[3], {c, us[i], vs[i]}});
        }
      }
      ds.instances.push_back(std::move(inst));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed annotation file: ") + e.what());
  }
  return ds;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline EvalDataset load_annotations(const std::string& path) { return parse_annotations(read_json_file(path)); }

inline nlohmann::json prediction_to_json(const EvalPrediction& p) {
  const Box& b = p.dp.box;
  return {{"image_id", p.image_id},
          {"bbox", {b.x1, b.y1, b.x2 - b.x1, b.y2 - b.y1}},
          {"score", p.score},
          {"parts", p.dp.parts},
          {"u", p.dp.u},
          {"v", p.dp.v}};
}

inline nlohmann::json predictions_to_json(const std::vector<EvalPrediction>& ps) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : ps) out.push_back(prediction_to_json(p));
  return out;
}

/// Results list; parts/u/v must hold S*S values for a square grid.
inline std::vector<EvalPrediction> parse_predictions(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("results must be a JSON list");
  std::vector<EvalPrediction> out;
  try {
    for (const auto& r : j) {
      EvalPrediction p;
      p.image_id = r.at("image_id").get<std::int64_t>();
      p.score = r.at("score").get<float>();
      const auto bb = r.at("bbox").get<std::vector<float>>();
      if (bb.size() != 4) throw InputError("result bbox must have 4 numbers");
      p.dp.box = Box::from_xywh(bb[0], bb[1], bb[2], bb[3]);
      const auto parts = r.at("parts").get<std::vector<int>>();
      p.dp.u = r.at("u").get<std::vector<float>>();
      p.dp.v = r.at("v").get<std::vector<float>>();
      const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(parts.size()))));
      if (s == 0 || static_cast<std::size_t>(s) * s != parts.size() || p.dp.u.size() != parts.size() ||
          p.dp.v.size() != parts.size())
        throw InputError("result parts/u/v must be equal-length square grids");
      p.dp.size = s;
      for (int c : parts) {
        if (c < 0 || c > 24) throw InputError("result part index out of range");
        p.dp.parts.push_back(static_cast<std::uint8_t>(c));
      }
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed results file: ") + e.what());
  }
  return out;
}

inline nlohmann::json ap_to_json(const ApReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [t, ap] : r.per_threshold) {
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", t);
    per[key] = opt(ap);
  }
  return {{"ap", opt(r.ap)}, {"per_threshold", per}};
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  return {{"box", ap_to_json(r.box)},
          {"densepose", ap_to_json(r.densepose)},
          {"images", r.images},
          {"instances", r.instances},
          {"densepose_instances", r.dp_instances},
          {"predictions", r.predictions}};
}

}  // namespace lightdense
