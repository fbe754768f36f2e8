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

// Umbrella header.

#pragma once

#include "lightdense/backbone.hpp"
#include "lightdense/bench.hpp"
#include "lightdense/box.hpp"
#include "lightdense/config.hpp"
#include "lightdense/detection.hpp"
#include "lightdense/errors.hpp"
#include "lightdense/eval.hpp"
#include "lightdense/execute.hpp"
#include "lightdense/fusion.hpp"
#include "lightdense/graph.hpp"
#include "lightdense/image.hpp"
#include "lightdense/kernels.hpp"
#include "lightdense/model.hpp"
#include "lightdense/neck.hpp"
#include "lightdense/pipeline.hpp"
#include "lightdense/qkernels.hpp"
#include "lightdense/qtensor.hpp"
#include "lightdense/quantize.hpp"
#include "lightdense/render.hpp"
#include "lightdense/roi_align.hpp"
#include "lightdense/runtime.hpp"
#include "lightdense/tensor.hpp"
#include "lightdense/weights.hpp"
