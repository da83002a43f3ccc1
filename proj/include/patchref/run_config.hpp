// Copyright 2026 The patchref Authors. All Rights Reserved.
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

// Flat "key = value" run configuration. Every key has a default, unknown
// keys are rejected, '#' starts a comment.

#ifndef PATCHREF_RUN_CONFIG_HPP
#define PATCHREF_RUN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "patchref/evaluator.hpp"
#include "patchref/inference.hpp"
#include "patchref/patch_pipeline.hpp"

namespace patchref {

struct RunConfig {
  std::string data_root;
  std::string split;
  std::string preset = "lrn";
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string class_name = "Car";

  double box_margin = 0.2;
  std::uint64_t surface_window = 64;
  double prob_easy = 1.0;
  double prob_moderate = 0.8;
  double prob_hard = 0.6;
  std::uint64_t min_object_points = 0;
  double global_mirror_prob = 0.5;
  double global_scale_min = 0.95;
  double global_scale_max = 1.05;
  double object_mirror_prob = 0.5;
  double object_scale_min = 0.95;
  double object_scale_max = 1.05;
  double rotation_min = -kPi / 2;
  double rotation_max = kPi / 2;
  double crop_noise_radius = 3.0;

  double removal_score_threshold = 0.0;
  double score_threshold = 0.05;
  std::uint64_t detections_per_patch = 1;
  double nms_threshold = 0.01;

  double iou_threshold = 0.7;
  std::string metric = "3d";          // 3d | bev
  std::string interpolation = "r11";  // r11 | r40
  std::uint64_t n_total = 512;

  PatchConfig patch_config() const;
  RefineConfig refine_config() const;
  EvalConfig eval_config() const;

  /// Throws DataError on out-of-range or inconsistent values.
  void validate() const;
};

std::vector<std::string> run_config_keys();

/// Applies "key = value" lines on top of `base`. Unknown keys and malformed
/// lines throw FormatError naming the line; bad values throw DataError.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one key; same errors as parse_run_config.
void set_run_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Fully resolved configuration, one "key = value" per line, in key order.
std::string format_run_config(const RunConfig& config);

}  // namespace patchref

#endif  // PATCHREF_RUN_CONFIG_HPP
