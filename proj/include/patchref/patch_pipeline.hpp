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

// Patch construction for the local refinement stage.
//
// Training: objects and their surrounding surfaces are cut out of labeled
// scenes, surfaces are rotated onto the depth axis (+x) and both lists are
// sorted by sensor distance. A patch re-hosts an object on a surface of
// similar distance, applies global and per-object mirror/scale plus a
// global yaw rotation, and is cropped around the object center shifted by
// a random offset.
//
// Inference: a square around a proposal is cut out, points of other
// proposals are removed, and the patch is rotated so the proposal sits on
// the depth axis. The rotation is kept for mapping predictions back.

#ifndef PATCHREF_PATCH_PIPELINE_HPP
#define PATCHREF_PATCH_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "patchref/common.hpp"
#include "patchref/geometry.hpp"
#include "patchref/kitti_io.hpp"

namespace patchref {

inline constexpr double kPatchHalfExtent = 4.8;

struct SceneObject {
  Box3d box;  // sensor frame
  std::string class_name;
  Difficulty difficulty = Difficulty::Ignored;
};

struct Scene {
  std::string id;
  PointCloud cloud;
  std::vector<SceneObject> objects;  // DontCare excluded
};

/// Converts labels to sensor-frame boxes with their difficulty.
Scene make_scene(const Frame& frame);

struct AugmentConfig {
  double global_mirror_probability = 0.5;
  double global_scale_min = 0.95;
  double global_scale_max = 1.05;
  double object_mirror_probability = 0.5;
  double object_scale_min = 0.95;
  double object_scale_max = 1.05;
  double rotation_min = -kPi / 2;
  double rotation_max = kPi / 2;

  /// No-op configuration: every draw resolves to the identity.
  static AugmentConfig identity();
};

struct PatchConfig {
  std::string class_name = "Car";
  double box_margin = 0.2;  // per side, on l, w and h
  double half_extent = kPatchHalfExtent;
  std::size_t surface_window = 64;
  std::array<double, 3> surface_probability{1.0, 0.8, 0.6};  // easy, moderate, hard
  std::size_t min_object_points = 0;
  double crop_noise_radius = 3.0;
  AugmentConfig augment;
};

struct ObjectEntry {
  PointMatrix points;  // sensor frame, as recorded
  Box3d box;
  std::string frame_id;
  int object_index = -1;  // into Scene::objects
  double distance = 0;    // BEV distance of the box center
  Difficulty difficulty = Difficulty::Ignored;
  std::size_t surface_index = 0;  // own surface in the sorted surface list
};

struct SurfaceEntry {
  PointMatrix points;  // rotated so the object center lies on +x
  Box3d object_box;    // original object, rotated along with the surface
  double vertical_reference = 0;  // bottom-face z of the original object
  double distance = 0;
  double alignment_rotation = 0;  // applied yaw rotation
  std::string frame_id;
  int object_index = -1;
};

struct ObjectSurfaceLists {
  std::vector<ObjectEntry> objects;    // ascending distance
  std::vector<SurfaceEntry> surfaces;  // ascending distance
};

ObjectSurfaceLists build_object_surface_lists(std::span<const Scene> scenes,
                                              const PatchConfig& config = {});

/// Indices of the `k` surfaces closest in distance to `distance`; ties in
/// distance gap go to the nearer-sorted (smaller) entry.
std::vector<std::size_t> nearest_surfaces(double distance, std::span<const SurfaceEntry> surfaces,
                                          std::size_t k);

struct SurfaceChoice {
  std::size_t index = 0;
  bool resampled = false;
};

/// With the difficulty's probability draws uniformly from the nearest
/// `surface_window` surfaces, otherwise keeps the object's own surface.
SurfaceChoice pair_object_with_surface(const ObjectEntry& object,
                                       std::span<const SurfaceEntry> surfaces,
                                       const PatchConfig& config, Rng& rng);

struct PlacedObject {
  PointMatrix points;  // surface rows, then object rows
  Box3d box;
  Index object_begin = 0;
};

/// Moves the object onto the surface's original object location: yaw
/// rotation onto +x, radial shift, and a z shift putting the box bottom at
/// the surface's vertical reference.
PlacedObject place_object_on_surface(const ObjectEntry& object, const SurfaceEntry& surface);

enum class AugmentKind : std::uint8_t { Mirror = 0, Scale = 1, Rotation = 2, Translation = 3 };
enum class AugmentScope : std::uint8_t { Global = 0, Object = 1 };

struct AugmentStep {
  AugmentKind kind;
  AugmentScope scope;
  double value;  // mirror: 1 applied / 0 skipped; scale: factor; rotation: rad
};

struct AugmentationLog {
  std::uint64_t seed = 0;
  std::vector<AugmentStep> steps;
};

struct AugmentedPatch {
  PointMatrix points;
  Box3d box;
  Index object_begin = 0;
  AugmentationLog log;
};

/// Global mirror (y -> -y), global scale about the sensor origin,
/// per-object mirror about the sensor ray through the object and
/// per-object scale about its bottom center, then a global yaw rotation.
AugmentedPatch augment(const PlacedObject& placed, const AugmentConfig& config, std::uint64_t seed);

/// Re-applies a recorded log; used to audit augmentation output.
AugmentedPatch replay_augmentation(const PlacedObject& placed, const AugmentationLog& log);

struct CropNoise {
  double radius = 0;  // [0, max]
  double angle = 0;   // [-pi, pi]
};

CropNoise sample_crop_noise(Rng& rng, double max_radius = 3.0);

struct Patch {
  PointMatrix points;
  Box3d box;
  Eigen::Vector2d crop_center = Eigen::Vector2d::Zero();
  CropNoise noise;
  AugmentationLog log;
  std::string frame_id;
  int object_index = -1;
  Difficulty difficulty = Difficulty::Ignored;
  std::string surface_frame_id;
  int surface_object_index = -1;
  bool surface_resampled = false;
};

/// Inclusive square test |x - cx| <= h and |y - cy| <= h.
inline bool in_square(const Eigen::Vector2d& p, const Eigen::Vector2d& center, double half) {
  return std::abs(p.x() - center.x()) <= half && std::abs(p.y() - center.y()) <= half;
}

/// Rows of `points` whose BEV position lies in the square.
std::vector<Index> crop_indices(const PointMatrix& points, const Eigen::Vector2d& center,
                                double half_extent);

/// Crops around box center + (r cos phi, r sin phi). Throws ContractError
/// for noise out of range and DataError when the box footprint misses the
/// crop entirely.
Patch crop_patch(const PointMatrix& points, const Box3d& box, const CropNoise& noise,
                 double half_extent = kPatchHalfExtent, double max_radius = 3.0);

/// Full construction of one training patch, deterministic in `seed`.
Patch make_training_patch(const ObjectSurfaceLists& lists, std::size_t object_index,
                          const PatchConfig& config, std::uint64_t seed);

/// Patch i uses seed derive_seed(seed, i). Output is independent of the
/// worker count.
std::vector<Patch> build_training_patches(const ObjectSurfaceLists& lists,
                                          const PatchConfig& config, std::uint64_t seed,
                                          unsigned workers = 1);

// -- inference ---------------------------------------------------------------

struct ScoredBox {
  Box3d box;
  double score = 1.0;
};

struct ExtractionConfig {
  double half_extent = kPatchHalfExtent;
  double box_margin = 0.2;
  /// Other proposals are cleared only when their score reaches this value.
  double removal_score_threshold = 0.0;
  bool rotate_to_depth_axis = true;
};

struct InferencePatch {
  PointMatrix points;                                    // patch frame
  Eigen::Vector2d center = Eigen::Vector2d::Zero();      // crop center, patch frame
  Eigen::Vector2d scene_center = Eigen::Vector2d::Zero();  // proposal center, scene frame
  double rotation = 0;  // scene -> patch yaw rotation about the sensor origin
  std::size_t removed_points = 0;

  Box3d to_scene(const Box3d& box) const { return rotate_about_z(box, -rotation); }
  Box3d to_patch(const Box3d& box) const { return rotate_about_z(box, rotation); }
};

InferencePatch extract_inference_patch(const PointMatrix& scene, const Eigen::Vector2d& center,
                                       std::span<const ScoredBox> other_proposals,
                                       const ExtractionConfig& config = {});

}  // namespace patchref

#endif  // PATCHREF_PATCH_PIPELINE_HPP
