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

// lightdense command-line interface.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lightdense/lightdense.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lightdense;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;

struct ModelOptions {
  std::string model = "model-b";
  std::string weights;
  std::uint64_t seed = 0;
  bool quantized = false;

  void add(CLI::App* app, bool with_quantized_flag) {
    app->add_option("--model", model, "Model config JSON, or a built-in name (model-b, model-a)");
    app->add_option("--weights", weights, "Weight file; seeded random weights when omitted");
    app->add_option("--seed", seed, "Seed for random weights");
    if (with_quantized_flag)
      app->add_flag("--quantized", quantized,
                    "Use an int8 model (the weight file must be quantized; random weights are calibrated "
                    "on the input images)");
  }
};

ModelConfig load_config(const std::string& model) {
  if (model == "model-b") return default_model_b();
  if (model == "model-a") return default_model_a();
  return load_model_config(model);
}

struct Loaded {
  ModelConfig cfg;
  ModelGraph graph;
  std::size_t file_bytes = 0;
};

/// Float model, or quantized when the weight file is int8.
Loaded load_model(const ModelOptions& o) {
  Loaded l{load_config(o.model), {}, 0};
  if (o.weights.empty()) {
    l.graph = seeded_graph(l.cfg, o.seed);
    return l;
  }
  const auto bytes = read_file_bytes(o.weights);
  l.file_bytes = bytes.size();
  l.graph = load_graph(l.cfg, bytes);
  if (o.quantized && !l.graph.quantized)
    throw ConfigError("--quantized given but '" + o.weights + "' holds float weights");
  return l;
}

/// Applies --quantized to a float model by calibrating on `calib`.
void ensure_variant(Loaded& l, const ModelOptions& o, const std::vector<PreparedInput>& calib) {
  if (o.quantized && !l.graph.quantized) l.graph = quantize_with_images(l.cfg, l.graph, calib);
}

std::vector<fs::path> list_ppm(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("'" + dir + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InputError("no .ppm images in '" + dir + "'");
  return out;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

int shortest_side_or_default(int requested, const ModelConfig& cfg) {
  return requested > 0 ? requested : cfg.test.shortest_side;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lightdense: dense human pose detector, quantizer, evaluator and benchmark"};
  app.require_subcommand(1);

  // init
  ModelOptions init_m;
  std::string init_out;
  auto* init = app.add_subcommand("init", "Write seeded random float weights");
  init_m.add(init, false);
  init->add_option("--out", init_out, "Output weight file")->required();

  // infer
  ModelOptions infer_m;
  std::string infer_path, infer_out, infer_overlay;
  int infer_side = 0;
  std::int64_t infer_id = 0;
  auto* infer = app.add_subcommand("infer", "Run detection and DensePose on one image");
  infer_m.add(infer, true);
  infer->add_option("--image", infer_path, "Input PPM (P6)")->required();
  infer->add_option("--shortest-side", infer_side, "Resize shortest side (default from config)");
  infer->add_option("--out", infer_out, "Results JSON (default stdout)");
  infer->add_option("--overlay", infer_overlay, "Write an overlay PPM");
  infer->add_option("--image-id", infer_id, "image_id written to results");

  // quantize
  ModelOptions quant_m;
  std::string quant_calib, quant_out;
  int quant_side = 0, quant_dp = 16;
  auto* quant = app.add_subcommand("quantize", "Fuse, calibrate and convert to int8");
  quant_m.add(quant, false);
  quant->add_option("--calib-dir", quant_calib, "Directory of calibration PPMs")->required();
  quant->add_option("--out", quant_out, "Output int8 weight file")->required();
  quant->add_option("--shortest-side", quant_side, "Resize shortest side (default from config)");
  quant->add_option("--dp-rois", quant_dp, "Proposals fed to the DensePose head per calibration image");

  // eval
  ModelOptions eval_m;
  std::string eval_ann, eval_images, eval_results, eval_report, eval_table, eval_dump;
  int eval_side = 0;
  std::optional<int> eval_max_people;
  auto* ev = app.add_subcommand("eval", "Box AP and GPS AP on annotations");
  eval_m.add(ev, true);
  ev->add_option("--annotations", eval_ann, "DensePose-COCO style annotation JSON")->required();
  ev->add_option("--images", eval_images, "Directory holding the annotated images (file_name)");
  ev->add_option("--results", eval_results, "Score an existing results JSON instead of running the model");
  ev->add_option("--max-people", eval_max_people, "Keep images with at most k people");
  ev->add_option("--shortest-side", eval_side, "Resize shortest side (default from config)");
  ev->add_option("--chart-table", eval_table, "Chart-pair geodesic table JSON");
  ev->add_option("--dump-results", eval_dump, "Also write the predictions JSON");
  ev->add_option("--report", eval_report, "Report JSON (default stdout)");

  // bench
  ModelOptions bench_m;
  std::string bench_images, bench_report, bench_ann;
  std::vector<int> bench_sides;
  int bench_warmup = 5, bench_repeats = 1;
  std::optional<int> bench_max_people;
  auto* bench = app.add_subcommand("bench", "Latency and FPS over an image set");
  bench_m.add(bench, true);
  bench->add_option("--images", bench_images, "Directory of PPMs")->required();
  bench->add_option("--warmup", bench_warmup, "Untimed warmup runs");
  bench->add_option("--repeats", bench_repeats, "Timed passes over the set");
  bench->add_option("--shortest-side", bench_sides, "One or more sizes to sweep");
  bench->add_option("--annotations", bench_ann, "Annotation JSON (for --max-people)");
  bench->add_option("--max-people", bench_max_people, "Keep images with at most k annotated people");
  bench->add_option("--report", bench_report, "Report JSON (default stdout)");

  // inspect
  ModelOptions insp_m;
  auto* insp = app.add_subcommand("inspect", "Parameter count, weight file size, taps");
  insp_m.add(insp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*init) {
      const auto l = load_model(init_m);
      write_file_bytes(init_out, save_weights(l.graph));
    } else if (*infer) {
      auto l = load_model(infer_m);
      const Image img = load_ppm(infer_path);
      const auto in = prepare_input(img, shortest_side_or_default(infer_side, l.cfg));
      ensure_variant(l, infer_m, {in});
      const Detector det(l.cfg, l.graph);
      const auto res = infer_image(det, in);
      write_json(infer_out, predictions_to_json(to_predictions(infer_id, res)));
      if (!infer_overlay.empty()) write_file_bytes(infer_overlay, write_ppm(render_overlay(img, res)));
    } else if (*quant) {
      auto l = load_model(quant_m);
      if (l.graph.quantized) throw ConfigError("weights are already quantized");
      std::vector<PreparedInput> calib;
      for (const auto& p : list_ppm(quant_calib))
        calib.push_back(prepare_input(load_ppm(p.string()), shortest_side_or_default(quant_side, l.cfg)));
      write_file_bytes(quant_out, save_weights(quantize_with_images(l.cfg, l.graph, calib, quant_dp)));
    } else if (*ev) {
      EvalDataset ds = load_annotations(eval_ann);
      if (eval_max_people) ds = filter_by_people(ds, *eval_max_people);
      GpsParams gp;
      if (!eval_table.empty()) {
        const auto table = ChartPairTable::load(eval_table);
        gp.provider = [table](const Triplet& a, const Triplet& b) { return table(a, b); };
      }
      std::vector<EvalPrediction> preds;
      if (!eval_results.empty()) {
        preds = parse_predictions(read_json_file(eval_results));
      } else {
        if (eval_images.empty()) throw ConfigError("eval needs --results or --images");
        auto l = load_model(eval_m);
        const int side = shortest_side_or_default(eval_side, l.cfg);
        std::vector<PreparedInput> inputs;
        for (const auto& im : ds.images)
          inputs.push_back(prepare_input(load_ppm((fs::path(eval_images) / im.file_name).string()), side));
        if (!inputs.empty()) ensure_variant(l, eval_m, {inputs.front()});
        const Detector det(l.cfg, l.graph);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          const auto p = to_predictions(ds.images[i].id, infer_image(det, inputs[i]));
          preds.insert(preds.end(), p.begin(), p.end());
        }
        if (!eval_dump.empty()) write_json(eval_dump, predictions_to_json(preds));
      }
      write_json(eval_report, report_to_json(evaluate(ds, preds, gp)));
    } else if (*bench) {
      auto l = load_model(bench_m);
      auto paths = list_ppm(bench_images);
      if (bench_max_people) {
        if (bench_ann.empty()) throw ConfigError("--max-people needs --annotations");
        const auto ds = filter_by_people(load_annotations(bench_ann), *bench_max_people);
        std::vector<fs::path> kept;
        for (const auto& p : paths)
          for (const auto& im : ds.images)
            if (p.filename() == im.file_name) kept.push_back(p);
        paths = kept;
        if (paths.empty()) throw ConfigError("no images left after --max-people filtering");
      }
      std::vector<Image> images;
      for (const auto& p : paths) images.push_back(load_ppm(p.string()));
      if (bench_sides.empty()) bench_sides.push_back(l.cfg.test.shortest_side);
      json runs = json::array();
      for (int side : bench_sides) {
        std::vector<PreparedInput> inputs;
        for (const auto& im : images) inputs.push_back(prepare_input(im, side));
        Loaded variant = l;
        ensure_variant(variant, bench_m, {inputs.front()});
        const Detector det(variant.cfg, variant.graph);
        auto rep = benchmark(
            inputs.size(), [&](std::size_t i) { infer_image(det, inputs[i]); }, bench_warmup, bench_repeats);
        rep.width = inputs.front().tensor.w();
        rep.height = inputs.front().tensor.h();
        rep.shortest_side = side;
        rep.variant = variant.cfg.name + (variant.graph.quantized ? "-int8" : "-fp32");
        runs.push_back(to_json(rep));
      }
      write_json(bench_report, {{"runs", runs}, {"images", images.size()}});
    } else if (*insp) {
      const auto l = load_model(insp_m);
      const std::size_t size = l.file_bytes ? l.file_bytes : save_weights(l.graph).size();
      json j{{"model", l.cfg.name},
             {"parameter_count", parameter_count(l.graph)},
             {"weight_file_bytes", size},
             {"quantized", l.graph.quantized},
             {"nodes", l.graph.nodes.size()},
             {"taps", l.graph.taps}};
      std::cout << j.dump(2) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
