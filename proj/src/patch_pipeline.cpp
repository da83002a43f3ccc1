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

#include "patchref/patch_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

namespace patchref {

namespace {

double bev_distance(const Box3d& box) { return box.bev_center().norm(); }

double azimuth(const Eigen::Vector2d& p) { return std::atan2(p.y(), p.x()); }

Box3d square_box(const Eigen::Vector2d& center, double half) {
  return make_box(center.x(), center.y(), 0.0, 2 * half, 2 * half, 1.0, 0.0);
}

// Mirror of xy across the line through the origin at angle `theta`.
Eigen::Matrix2d reflection(double theta) {
  const double c = std::cos(2 * theta);
  const double s = std::sin(2 * theta);
  Eigen::Matrix2d m;
  m << c, s, s, -c;
  return m;
}

void apply_step(const AugmentStep& step, PointMatrix& points, Index object_begin, Box3d& box) {
  const Index n_obj = points.rows() - object_begin;
  auto object_rows = points.bottomRows(n_obj);
  switch (step.kind) {
    case AugmentKind::Mirror: {
      if (step.value == 0) return;
      if (step.scope == AugmentScope::Global) {
        points.col(1) *= -1.0;
        box.center.y() = -box.center.y();
        box.yaw = wrap_angle(-box.yaw);
      } else {
        const double theta = azimuth(box.bev_center());
        const Eigen::Matrix2d m = reflection(theta);
        object_rows.leftCols<2>() = object_rows.leftCols<2>() * m.transpose();
        box.center.head<2>() = m * box.bev_center();
        box.yaw = wrap_angle(2 * theta - box.yaw);
      }
      return;
    }
    case AugmentKind::Scale: {
      const double s = step.value;
      if (s == 1.0) return;  // keeps the identity configuration bit-exact
      if (step.scope == AugmentScope::Global) {
        points.leftCols<3>() *= s;
        box.center *= s;
        box.length *= s;
        box.width *= s;
        box.height *= s;
      } else {
        const Eigen::RowVector3d pivot(box.center.x(), box.center.y(), box.bottom());
        object_rows.leftCols<3>() =
            ((object_rows.leftCols<3>().rowwise() - pivot) * s).rowwise() + pivot;
        const double bottom = box.bottom();
        box.length *= s;
        box.width *= s;
        box.height *= s;
        box.center.z() = bottom + box.height / 2;
      }
      return;
    }
    case AugmentKind::Rotation: {
      if (step.scope != AugmentScope::Global) {
        throw ContractError("per-object rotation is not a supported augmentation");
      }
      if (step.value == 0.0) return;
      points = rotate_about_z<double>(points, step.value);
      box = rotate_about_z(box, step.value);
      return;
    }
    case AugmentKind::Translation:
      throw ContractError("translation is not a supported augmentation");
  }
}

}  // namespace

Scene make_scene(const Frame& frame) {
  Scene scene;
  scene.id = frame.id;
  scene.cloud = frame.cloud;
  for (const auto& label : frame.labels) {
    if (label.is_dont_care()) continue;
    scene.objects.push_back(
        {camera_box_to_sensor_frame(label, frame.calib), label.class_name, classify_difficulty(label)});
  }
  return scene;
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig c;
  c.global_mirror_probability = 0;
  c.global_scale_min = c.global_scale_max = 1;
  c.object_mirror_probability = 0;
  c.object_scale_min = c.object_scale_max = 1;
  c.rotation_min = c.rotation_max = 0;
  return c;
}

ObjectSurfaceLists build_object_surface_lists(std::span<const Scene> scenes,
                                              const PatchConfig& config) {
  ObjectSurfaceLists lists;
  for (const auto& scene : scenes) {
    // Points of every annotated object are cleared from the surfaces.
    std::vector<Index> occupied;
    for (const auto& obj : scene.objects) {
      const auto inside = points_in_box(scene.cloud, obj.box, config.box_margin);
      occupied.insert(occupied.end(), inside.begin(), inside.end());
    }
    const PointMatrix free_points = erase_rows(scene.cloud.points, occupied);

    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
      const auto& obj = scene.objects[k];
      if (obj.class_name != config.class_name || obj.difficulty == Difficulty::Ignored) continue;
      const auto inside = points_in_box(scene.cloud, obj.box, config.box_margin);
      if (inside.size() < config.min_object_points) continue;

      ObjectEntry entry;
      entry.points = gather_rows(scene.cloud.points, inside);
      entry.box = obj.box;
      entry.frame_id = scene.id;
      entry.object_index = static_cast<int>(k);
      entry.distance = bev_distance(obj.box);
      entry.difficulty = obj.difficulty;

      SurfaceEntry surface;
      surface.alignment_rotation = -azimuth(obj.box.bev_center());
      surface.object_box = rotate_about_z(obj.box, surface.alignment_rotation);
      surface.object_box.center.y() = 0.0;  // exactly on the depth axis
      surface.vertical_reference = obj.box.bottom();
      surface.distance = entry.distance;
      surface.frame_id = scene.id;
      surface.object_index = static_cast<int>(k);
      const PointMatrix rotated = rotate_about_z<double>(free_points, surface.alignment_rotation);
      surface.points = gather_rows(
          rotated, crop_indices(rotated, surface.object_box.bev_center(), config.half_extent));

      lists.objects.push_back(std::move(entry));
      lists.surfaces.push_back(std::move(surface));
    }
  }

  // Sort both lists and re-link each object to its own surface.
  std::vector<std::size_t> order(lists.surfaces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lists.surfaces[a].distance < lists.surfaces[b].distance;
  });
  std::vector<std::size_t> rank(order.size());
  std::vector<SurfaceEntry> sorted_surfaces;
  std::vector<ObjectEntry> sorted_objects;
  sorted_surfaces.reserve(order.size());
  sorted_objects.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[order[r]] = r;
    sorted_surfaces.push_back(std::move(lists.surfaces[order[r]]));
    sorted_objects.push_back(std::move(lists.objects[order[r]]));
    sorted_objects.back().surface_index = r;
  }
  lists.surfaces = std::move(sorted_surfaces);
  lists.objects = std::move(sorted_objects);
  return lists;
}

std::vector<std::size_t> nearest_surfaces(double distance, std::span<const SurfaceEntry> surfaces,
                                          std::size_t k) {
  k = std::min(k, surfaces.size());
  const auto it = std::lower_bound(
      surfaces.begin(), surfaces.end(), distance,
      [](const SurfaceEntry& s, double d) { return s.distance < d; });
  auto hi = static_cast<std::size_t>(it - surfaces.begin());
  auto lo = hi;  // window is [lo, hi)
  while (hi - lo < k) {
    if (lo == 0) {
      ++hi;
    } else if (hi == surfaces.size()) {
      --lo;
    } else if (distance - surfaces[lo - 1].distance <= surfaces[hi].distance - distance) {
      --lo;
    } else {
      ++hi;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = lo; i < hi; ++i) out.push_back(i);
  return out;
}

SurfaceChoice pair_object_with_surface(const ObjectEntry& object,
                                       std::span<const SurfaceEntry> surfaces,
                                       const PatchConfig& config, Rng& rng) {
  if (surfaces.empty()) throw ContractError("surface list is empty");
  double p = 0;
  switch (object.difficulty) {
    case Difficulty::Easy: p = config.surface_probability[0]; break;
    case Difficulty::Moderate: p = config.surface_probability[1]; break;
    case Difficulty::Hard: p = config.surface_probability[2]; break;
    case Difficulty::Ignored: p = 0; break;
  }
  // Both draws are always taken so the stream position does not depend on
  // the branch.
  const bool resample = rng.bernoulli(p);
  const auto window = nearest_surfaces(object.distance, surfaces, config.surface_window);
  const auto pick = window[rng.index(window.size())];
  if (!resample) return {std::min(object.surface_index, surfaces.size() - 1), false};
  return {pick, true};
}

PlacedObject place_object_on_surface(const ObjectEntry& object, const SurfaceEntry& surface) {
  const double rotation = -azimuth(object.box.bev_center());
  Box3d box = rotate_about_z(object.box, rotation);
  PointMatrix obj_points = rotate_about_z<double>(object.points, rotation);

  const Eigen::Vector3d shift(surface.object_box.center.x() - box.center.x(),
                              surface.object_box.center.y() - box.center.y(),
                              surface.vertical_reference - box.bottom());
  obj_points.leftCols<3>().rowwise() += shift.transpose();
  box.center += shift;

  PlacedObject placed;
  placed.points = concat_rows(surface.points, obj_points);
  placed.box = box;
  placed.object_begin = surface.points.rows();
  return placed;
}

AugmentedPatch replay_augmentation(const PlacedObject& placed, const AugmentationLog& log) {
  AugmentedPatch out;
  out.points = placed.points;
  out.box = placed.box;
  out.object_begin = placed.object_begin;
  out.log = log;
  for (const auto& step : log.steps) apply_step(step, out.points, out.object_begin, out.box);
  return out;
}

AugmentedPatch augment(const PlacedObject& placed, const AugmentConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  AugmentationLog log;
  log.seed = seed;
  // Fixed draw order: all five values are drawn regardless of outcome.
  const bool global_mirror = rng.bernoulli(c.global_mirror_probability);
  const double global_scale = rng.uniform(c.global_scale_min, c.global_scale_max);
  const bool object_mirror = rng.bernoulli(c.object_mirror_probability);
  const double object_scale = rng.uniform(c.object_scale_min, c.object_scale_max);
  const double rotation = rng.uniform(c.rotation_min, c.rotation_max);

  log.steps = {
      {AugmentKind::Mirror, AugmentScope::Global, global_mirror ? 1.0 : 0.0},
      {AugmentKind::Scale, AugmentScope::Global, global_scale},
      {AugmentKind::Mirror, AugmentScope::Object, object_mirror ? 1.0 : 0.0},
      {AugmentKind::Scale, AugmentScope::Object, object_scale},
      {AugmentKind::Rotation, AugmentScope::Global, rotation},
  };
  return replay_augmentation(placed, log);
}

CropNoise sample_crop_noise(Rng& rng, double max_radius) {
  CropNoise noise;
  noise.radius = rng.uniform(0.0, max_radius);
  noise.angle = rng.uniform(-kPi, kPi);
  return noise;
}

std::vector<Index> crop_indices(const PointMatrix& points, const Eigen::Vector2d& center,
                                double half_extent) {
  std::vector<Index> keep;
  for (Index i = 0; i < points.rows(); ++i) {
    if (in_square(points.row(i).head<2>().transpose(), center, half_extent)) keep.push_back(i);
  }
  return keep;
}

Patch crop_patch(const PointMatrix& points, const Box3d& box, const CropNoise& noise,
                 double half_extent, double max_radius) {
  if (!(noise.radius >= 0 && noise.radius <= max_radius) ||
      !(noise.angle >= -kPi && noise.angle <= kPi)) {
    throw ContractError(fmt::format("crop noise (r={}, phi={}) out of range", noise.radius, noise.angle));
  }
  Patch patch;
  patch.noise = noise;
  patch.box = box;
  patch.crop_center =
      box.bev_center() + noise.radius * Eigen::Vector2d(std::cos(noise.angle), std::sin(noise.angle));
  if (bev_intersection_area(box, square_box(patch.crop_center, half_extent)) <= 0) {
    throw DataError("object footprint lies entirely outside the crop");
  }
  patch.points = gather_rows(points, crop_indices(points, patch.crop_center, half_extent));
  return patch;
}

Patch make_training_patch(const ObjectSurfaceLists& lists, std::size_t object_index,
                          const PatchConfig& config, std::uint64_t seed) {
  const auto& object = lists.objects.at(object_index);
  Rng rng(derive_seed(seed, "pairing"));
  const auto choice = pair_object_with_surface(object, lists.surfaces, config, rng);
  const auto& surface = lists.surfaces[choice.index];
  const PlacedObject placed = place_object_on_surface(object, surface);
  const AugmentedPatch aug = augment(placed, config.augment, derive_seed(seed, "augment"));
  Rng noise_rng(derive_seed(seed, "crop"));
  const CropNoise noise = sample_crop_noise(noise_rng, config.crop_noise_radius);

  Patch patch = crop_patch(aug.points, aug.box, noise, config.half_extent, config.crop_noise_radius);
  patch.log = aug.log;
  patch.frame_id = object.frame_id;
  patch.object_index = object.object_index;
  patch.difficulty = object.difficulty;
  patch.surface_frame_id = surface.frame_id;
  patch.surface_object_index = surface.object_index;
  patch.surface_resampled = choice.resampled;
  return patch;
}

std::vector<Patch> build_training_patches(const ObjectSurfaceLists& lists,
                                          const PatchConfig& config, std::uint64_t seed,
                                          unsigned workers) {
  const std::size_t n = lists.objects.size();
  std::vector<Patch> patches(n);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  const auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      patches[i] = make_training_patch(lists, i, config, derive_seed(seed, static_cast<std::uint64_t>(i)));
    }
  };
  if (workers == 1) {
    run(0, n);
    return patches;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        run(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return patches;
}

InferencePatch extract_inference_patch(const PointMatrix& scene, const Eigen::Vector2d& center,
                                       std::span<const ScoredBox> others,
                                       const ExtractionConfig& config) {
  InferencePatch patch;
  patch.scene_center = center;
  patch.rotation = config.rotate_to_depth_axis ? -azimuth(center) : 0.0;
  patch.center = rotation_2d(patch.rotation) * center;
  if (config.rotate_to_depth_axis) patch.center.y() = 0.0;

  // Coarse circular pre-filter in the scene frame before rotating.
  const double reach = config.half_extent * std::sqrt(2.0) + 1e-6;
  std::vector<Index> near;
  for (Index i = 0; i < scene.rows(); ++i) {
    if ((scene.row(i).head<2>().transpose() - center).norm() <= reach) near.push_back(i);
  }
  PointMatrix local = rotate_about_z<double>(gather_rows(scene, near), patch.rotation);
  local = gather_rows(local, crop_indices(local, patch.center, config.half_extent));

  const Box3d crop = square_box(patch.center, config.half_extent);
  std::vector<Index> removed;
  for (const auto& other : others) {
    if (other.score < config.removal_score_threshold) continue;
    const Box3d box = patch.to_patch(other.box);
    if (bev_intersection_area(box, crop) <= 0) continue;
    const auto inside = points_in_box<double>(local, box, config.box_margin);
    removed.insert(removed.end(), inside.begin(), inside.end());
  }
  std::sort(removed.begin(), removed.end());
  removed.erase(std::unique(removed.begin(), removed.end()), removed.end());
  patch.removed_points = removed.size();
  patch.points = erase_rows(local, removed);
  return patch;
}

}  // namespace patchref
