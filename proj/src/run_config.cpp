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

#include "patchref/run_config.hpp"

#include <charconv>
#include <functional>
#include <variant>

#include <fmt/format.h>

#include "patchref/voxelizer.hpp"
#include "text_util.hpp"

namespace patchref {

namespace {

using Field = std::variant<std::string RunConfig::*, double RunConfig::*, std::uint64_t RunConfig::*,
                           unsigned RunConfig::*>;

struct Key {
  std::string_view name;
  Field field;
};

// Sorted by name; format_run_config prints in this order.
const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"box_margin", &RunConfig::box_margin},
      {"class_name", &RunConfig::class_name},
      {"crop_noise_radius", &RunConfig::crop_noise_radius},
      {"data_root", &RunConfig::data_root},
      {"detections_per_patch", &RunConfig::detections_per_patch},
      {"global_mirror_prob", &RunConfig::global_mirror_prob},
      {"global_scale_max", &RunConfig::global_scale_max},
      {"global_scale_min", &RunConfig::global_scale_min},
      {"interpolation", &RunConfig::interpolation},
      {"iou_threshold", &RunConfig::iou_threshold},
      {"metric", &RunConfig::metric},
      {"min_object_points", &RunConfig::min_object_points},
      {"n_total", &RunConfig::n_total},
      {"nms_threshold", &RunConfig::nms_threshold},
      {"object_mirror_prob", &RunConfig::object_mirror_prob},
      {"object_scale_max", &RunConfig::object_scale_max},
      {"object_scale_min", &RunConfig::object_scale_min},
      {"preset", &RunConfig::preset},
      {"prob_easy", &RunConfig::prob_easy},
      {"prob_hard", &RunConfig::prob_hard},
      {"prob_moderate", &RunConfig::prob_moderate},
      {"removal_score_threshold", &RunConfig::removal_score_threshold},
      {"rotation_max", &RunConfig::rotation_max},
      {"rotation_min", &RunConfig::rotation_min},
      {"score_threshold", &RunConfig::score_threshold},
      {"seed", &RunConfig::seed},
      {"split", &RunConfig::split},
      {"surface_window", &RunConfig::surface_window},
      {"workers", &RunConfig::workers},
  };
  return table;
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw DataError(fmt::format("config '{}': expected a non-negative integer, got '{}'", key, value));
  }
  return out;
}

void check_unit(std::string_view name, double v) {
  if (!(v >= 0 && v <= 1)) throw DataError(fmt::format("config '{}' = {} outside [0, 1]", name, v));
}

void check_range(std::string_view lo_name, double lo, std::string_view hi_name, double hi) {
  if (!(lo <= hi)) throw DataError(fmt::format("config '{}' exceeds '{}'", lo_name, hi_name));
}

}  // namespace

std::vector<std::string> run_config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

void set_run_config_value(RunConfig& c, std::string_view key, std::string_view value) {
  for (const auto& k : keys()) {
    if (k.name != key) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(c.*member)>;
          if constexpr (std::is_same_v<T, std::string>) {
            c.*member = std::string(value);
          } else if constexpr (std::is_same_v<T, double>) {
            try {
              c.*member = detail::parse_double(value, 0, key);
            } catch (const DataError&) {
              throw DataError(fmt::format("config '{}': expected a number, got '{}'", key, value));
            }
          } else {
            c.*member = parse_unsigned<T>(key, value);
          }
        },
        k.field);
    return;
  }
  throw FormatError(fmt::format("unknown config key '{}'", key));
}

RunConfig parse_run_config(std::string_view text, RunConfig c) {
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (detail::is_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError(fmt::format("config line {}: expected 'key = value'", i + 1));
    }
    const auto key_tokens = detail::split_ws(line.substr(0, eq));
    const auto value_tokens = detail::split_ws(line.substr(eq + 1));
    if (key_tokens.size() != 1 || value_tokens.size() > 1) {
      throw FormatError(fmt::format("config line {}: expected 'key = value'", i + 1));
    }
    try {
      set_run_config_value(c, key_tokens[0], value_tokens.empty() ? std::string_view{} : value_tokens[0]);
    } catch (const FormatError& e) {
      throw FormatError(fmt::format("config line {}: {}", i + 1, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("config line {}: {}", i + 1, e.what()));
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  const std::string text = read_text_file(path);
  try {
    return parse_run_config(text, std::move(base));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_run_config(const RunConfig& c) {
  std::string s;
  for (const auto& k : keys()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(c.*member)>;
          if constexpr (std::is_same_v<T, double>) {
            s += fmt::format("{} = {:.17g}\n", k.name, c.*member);
          } else {
            s += fmt::format("{} = {}\n", k.name, c.*member);
          }
        },
        k.field);
  }
  return s;
}

void RunConfig::validate() const {
  if (!preset_by_name(preset)) throw DataError(fmt::format("config 'preset': unknown grid preset '{}'", preset));
  if (metric != "3d" && metric != "bev") throw DataError("config 'metric' must be 3d or bev");
  if (interpolation != "r11" && interpolation != "r40") {
    throw DataError("config 'interpolation' must be r11 or r40");
  }
  if (workers == 0) throw DataError("config 'workers' must be at least 1");
  if (!(box_margin >= 0)) throw DataError("config 'box_margin' must be non-negative");
  if (surface_window == 0) throw DataError("config 'surface_window' must be at least 1");
  check_unit("prob_easy", prob_easy);
  check_unit("prob_moderate", prob_moderate);
  check_unit("prob_hard", prob_hard);
  check_unit("global_mirror_prob", global_mirror_prob);
  check_unit("object_mirror_prob", object_mirror_prob);
  check_unit("nms_threshold", nms_threshold);
  check_unit("score_threshold", score_threshold);
  check_unit("removal_score_threshold", removal_score_threshold);
  if (!(iou_threshold > 0 && iou_threshold <= 1)) throw DataError("config 'iou_threshold' outside (0, 1]");
  check_range("global_scale_min", global_scale_min, "global_scale_max", global_scale_max);
  check_range("object_scale_min", object_scale_min, "object_scale_max", object_scale_max);
  check_range("rotation_min", rotation_min, "rotation_max", rotation_max);
  if (rotation_min < -kPi / 2 || rotation_max > kPi / 2) {
    throw DataError("config rotation range must lie within [-pi/2, pi/2]");
  }
  if (!(global_scale_min > 0 && object_scale_min > 0)) throw DataError("scale factors must be positive");
  if (!(crop_noise_radius >= 0)) throw DataError("config 'crop_noise_radius' must be non-negative");
  if (n_total < 4) throw DataError("config 'n_total' must be at least 4");
  if (detections_per_patch == 0) throw DataError("config 'detections_per_patch' must be at least 1");
}

PatchConfig RunConfig::patch_config() const {
  PatchConfig p;
  p.class_name = class_name;
  p.box_margin = box_margin;
  p.surface_window = surface_window;
  p.surface_probability = {prob_easy, prob_moderate, prob_hard};
  p.min_object_points = min_object_points;
  p.crop_noise_radius = crop_noise_radius;
  p.augment.global_mirror_probability = global_mirror_prob;
  p.augment.global_scale_min = global_scale_min;
  p.augment.global_scale_max = global_scale_max;
  p.augment.object_mirror_probability = object_mirror_prob;
  p.augment.object_scale_min = object_scale_min;
  p.augment.object_scale_max = object_scale_max;
  p.augment.rotation_min = rotation_min;
  p.augment.rotation_max = rotation_max;
  return p;
}

RefineConfig RunConfig::refine_config() const {
  RefineConfig r;
  r.extraction.box_margin = box_margin;
  r.extraction.removal_score_threshold = removal_score_threshold;
  r.score_threshold = score_threshold;
  r.detections_per_patch = detections_per_patch;
  r.nms_threshold = nms_threshold;
  return r;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.iou_threshold = iou_threshold;
  e.metric = metric == "bev" ? IouMetric::IouBev : IouMetric::Iou3d;
  e.interpolation = interpolation == "r40" ? Interpolation::R40 : Interpolation::R11;
  e.class_name = class_name;
  return e;
}

}  // namespace patchref
