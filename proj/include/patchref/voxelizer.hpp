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

// Sparse voxel grouping and network-input feature construction.
//
// Only occupied voxels are materialised. Features are ragged: every real
// point contributes one row and no padding rows exist. Each row holds
// (x, y, z, r, x - cx, y - cy, z - cz) with c the centroid of the points
// kept in that voxel, then standardised per channel over the whole sample.

#ifndef PATCHREF_VOXELIZER_HPP
#define PATCHREF_VOXELIZER_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "patchref/point_cloud.hpp"

namespace patchref {

enum class OverflowPolicy {
  KeepFirst,        // first max_points_per_voxel points in cloud order
  RandomSubsample,  // uniform subset (reservoir) under `overflow_seed`
};

struct VoxelGridConfig {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d extent = Eigen::Vector3d::Ones();
  Eigen::Vector3d voxel_size = Eigen::Vector3d::Ones();
  int max_points_per_voxel = 35;
  std::int64_t max_voxels = 0;  // 0: no limit
  OverflowPolicy overflow = OverflowPolicy::KeepFirst;
  std::uint64_t overflow_seed = 0;

  /// Throws ContractError unless extent / voxel_size is integral (1e-9).
  Eigen::Vector3i dims() const;
  void validate() const;
};

/// 9.6 x 9.6 x 4 m patch grid of 64 x 64 x 19 voxels centered on
/// `patch_center` in x/y, z in [-3, 1].
VoxelGridConfig preset_lrn(const Eigen::Vector2d& patch_center = Eigen::Vector2d::Zero());

/// Whole-scene grid: x in [0, 70.4], y in [-40, 40], z in [-3, 1] with
/// 0.2 x 0.2 x 2.0 m voxels (352 x 400 x 2).
VoxelGridConfig preset_rpn();

std::optional<VoxelGridConfig> preset_by_name(std::string_view name);

struct SparseVoxelSet {
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  std::vector<Eigen::Vector3i> coords;      // first-seen order
  std::vector<std::vector<Index>> members;  // parallel to coords

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }
  std::size_t point_count() const;
  /// Slot of `coord` or -1.
  std::int64_t find(const Eigen::Vector3i& coord) const;

  std::unordered_map<std::int64_t, std::size_t> lookup;
};

/// Linear key for a voxel coordinate inside `dims`.
std::int64_t voxel_key(const Eigen::Vector3i& coord, const Eigen::Vector3i& dims);

/// Voxel of a point: floor((p - origin) / voxel_size), or nullopt if the
/// point lies outside the grid.
std::optional<Eigen::Vector3i> voxel_of(const Eigen::Vector3d& p, const VoxelGridConfig& config,
                                        const Eigen::Vector3i& dims);

SparseVoxelSet group_points(const PointMatrix& points, const VoxelGridConfig& config);
inline SparseVoxelSet group_points(const PointCloud& cloud, const VoxelGridConfig& config) {
  return group_points(cloud.points, config);
}

inline constexpr int kFeatureChannels = 7;

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kFeatureChannels, Eigen::RowMajor>;
using ChannelVector = Eigen::Matrix<double, kFeatureChannels, 1>;

struct EncodedSample {
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, 3, Eigen::RowMajor> coords;
  std::vector<std::uint32_t> counts;  // points per voxel
  std::vector<std::uint64_t> offsets;  // size num_voxels + 1, rows into features
  FeatureMatrix features;              // normalised
  ChannelVector mean = ChannelVector::Zero();
  ChannelVector stddev = ChannelVector::Ones();

  std::size_t num_voxels() const { return counts.size(); }
};

/// Channels whose stddev falls below this are only mean-centred.
inline constexpr double kMinChannelStddev = 1e-6;

/// Throws ContractError on an empty voxel set.
EncodedSample encode_sample(const SparseVoxelSet& voxels, const PointMatrix& points);
inline EncodedSample encode_sample(const SparseVoxelSet& voxels, const PointCloud& cloud) {
  return encode_sample(voxels, cloud.points);
}

// Flat little-endian container for handing samples to training code:
//
//   char[4]  magic "PRVX"
//   u32      version (1)
//   u32      num_voxels V, u32 num_points N, u32 channels C (7)
//   i32[3]   grid dims
//   f64[C]   channel mean, f64[C] channel stddev
//   i32[3V]  voxel coordinates (i, j, k)
//   u32[V]   points per voxel
//   f32[N*C] normalised features, voxel-major then point then channel
std::vector<std::byte> serialize_sample(const EncodedSample& sample);
EncodedSample deserialize_sample(std::span<const std::byte> bytes);
void write_sample(const std::filesystem::path& path, const EncodedSample& sample);

}  // namespace patchref

#endif  // PATCHREF_VOXELIZER_HPP
