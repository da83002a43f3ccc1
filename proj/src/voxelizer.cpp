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

#include "patchref/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "patchref/binary_io.hpp"
#include "patchref/common.hpp"

namespace patchref {

Eigen::Vector3i VoxelGridConfig::dims() const {
  Eigen::Vector3i d;
  for (int a = 0; a < 3; ++a) {
    if (!(voxel_size[a] > 0) || !(extent[a] > 0)) {
      throw ContractError("voxel grid extent and voxel size must be positive");
    }
    const double cells = extent[a] / voxel_size[a];
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 || rounded < 1) {
      throw ContractError(fmt::format("extent {} is not a whole number of {} m voxels on axis {}",
                                      extent[a], voxel_size[a], a));
    }
    d[a] = static_cast<int>(rounded);
  }
  return d;
}

void VoxelGridConfig::validate() const {
  (void)dims();
  if (max_points_per_voxel < 1) throw ContractError("max_points_per_voxel must be >= 1");
  if (max_voxels < 0) throw ContractError("max_voxels must be >= 0");
}

VoxelGridConfig preset_lrn(const Eigen::Vector2d& patch_center) {
  VoxelGridConfig c;
  c.extent = {9.6, 9.6, 4.0};
  c.voxel_size = {0.15, 0.15, 4.0 / 19.0};
  c.origin = {patch_center.x() - 4.8, patch_center.y() - 4.8, -3.0};
  c.max_points_per_voxel = 35;
  c.max_voxels = 0;
  return c;
}

VoxelGridConfig preset_rpn() {
  VoxelGridConfig c;
  c.origin = {0.0, -40.0, -3.0};
  c.extent = {70.4, 80.0, 4.0};
  c.voxel_size = {0.2, 0.2, 2.0};
  c.max_points_per_voxel = 35;
  c.max_voxels = 0;
  return c;
}

std::optional<VoxelGridConfig> preset_by_name(std::string_view name) {
  if (name == "lrn") return preset_lrn();
  if (name == "rpn") return preset_rpn();
  return std::nullopt;
}

std::size_t SparseVoxelSet::point_count() const {
  std::size_t n = 0;
  for (const auto& m : members) n += m.size();
  return n;
}

std::int64_t SparseVoxelSet::find(const Eigen::Vector3i& coord) const {
  if ((coord.array() < 0).any() || (coord.array() >= dims.array()).any()) return -1;
  auto it = lookup.find(voxel_key(coord, dims));
  return it == lookup.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::int64_t voxel_key(const Eigen::Vector3i& coord, const Eigen::Vector3i& dims) {
  return (static_cast<std::int64_t>(coord.x()) * dims.y() + coord.y()) * dims.z() + coord.z();
}

std::optional<Eigen::Vector3i> voxel_of(const Eigen::Vector3d& p, const VoxelGridConfig& config,
                                        const Eigen::Vector3i& dims) {
  Eigen::Vector3i v;
  for (int a = 0; a < 3; ++a) {
    const double cell = std::floor((p[a] - config.origin[a]) / config.voxel_size[a]);
    if (!(cell >= 0) || cell >= dims[a]) return std::nullopt;
    v[a] = static_cast<int>(cell);
  }
  return v;
}

SparseVoxelSet group_points(const PointMatrix& points, const VoxelGridConfig& config) {
  config.validate();
  SparseVoxelSet set;
  set.dims = config.dims();
  const auto cap = static_cast<std::size_t>(config.max_points_per_voxel);
  const bool random = config.overflow == OverflowPolicy::RandomSubsample;
  Rng rng(config.overflow_seed);
  std::vector<std::size_t> seen;  // per slot, only for reservoir sampling

  for (Index i = 0; i < points.rows(); ++i) {
    const auto coord = voxel_of(points.row(i).head<3>().transpose(), config, set.dims);
    if (!coord) continue;
    const std::int64_t key = voxel_key(*coord, set.dims);
    auto it = set.lookup.find(key);
    if (it == set.lookup.end()) {
      if (config.max_voxels > 0 && static_cast<std::int64_t>(set.coords.size()) >= config.max_voxels) {
        continue;
      }
      it = set.lookup.emplace(key, set.coords.size()).first;
      set.coords.push_back(*coord);
      set.members.emplace_back();
      set.members.back().reserve(std::min<std::size_t>(cap, 8));
      if (random) seen.push_back(0);
    }
    auto& list = set.members[it->second];
    if (!random) {
      if (list.size() < cap) list.push_back(i);
      continue;
    }
    const std::size_t count = ++seen[it->second];
    if (list.size() < cap) {
      list.push_back(i);
    } else {
      const auto j = rng.index(count);
      if (j < cap) list[j] = i;
    }
  }
  if (random) {
    for (auto& list : set.members) std::sort(list.begin(), list.end());
  }
  return set;
}

EncodedSample encode_sample(const SparseVoxelSet& voxels, const PointMatrix& points) {
  if (voxels.empty()) throw ContractError("cannot encode an empty voxel set");
  EncodedSample s;
  s.dims = voxels.dims;
  const auto num_voxels = static_cast<Index>(voxels.size());
  const auto num_points = static_cast<Index>(voxels.point_count());
  s.coords.resize(num_voxels, 3);
  s.counts.resize(voxels.size());
  s.offsets.resize(voxels.size() + 1);
  s.features.resize(num_points, kFeatureChannels);

  Index row = 0;
  for (Index v = 0; v < num_voxels; ++v) {
    const auto& members = voxels.members[static_cast<std::size_t>(v)];
    s.coords.row(v) = voxels.coords[static_cast<std::size_t>(v)].transpose();
    s.counts[static_cast<std::size_t>(v)] = static_cast<std::uint32_t>(members.size());
    s.offsets[static_cast<std::size_t>(v)] = static_cast<std::uint64_t>(row);
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (Index idx : members) centroid += points.row(idx).head<3>().transpose();
    centroid /= static_cast<double>(members.size());
    for (Index idx : members) {
      s.features.row(row).head<4>() = points.row(idx);
      s.features.row(row).tail<3>() = points.row(idx).head<3>() - centroid.transpose();
      ++row;
    }
  }
  s.offsets.back() = static_cast<std::uint64_t>(row);

  s.mean = s.features.colwise().mean().transpose();
  const FeatureMatrix centred = s.features.rowwise() - s.mean.transpose();
  s.stddev = (centred.colwise().squaredNorm() / static_cast<double>(num_points)).cwiseSqrt().transpose();
  for (int c = 0; c < kFeatureChannels; ++c) {
    const double scale = s.stddev[c] < kMinChannelStddev ? 1.0 : s.stddev[c];
    s.features.col(c) = centred.col(c) / scale;
  }
  return s;
}

std::vector<std::byte> serialize_sample(const EncodedSample& s) {
  ByteWriter w;
  w.put_bytes("PRVX");
  w.put<std::uint32_t>(1);
  w.put(static_cast<std::uint32_t>(s.num_voxels()));
  w.put(static_cast<std::uint32_t>(s.features.rows()));
  w.put(static_cast<std::uint32_t>(kFeatureChannels));
  for (int a = 0; a < 3; ++a) w.put<std::int32_t>(s.dims[a]);
  for (int c = 0; c < kFeatureChannels; ++c) w.put(s.mean[c]);
  for (int c = 0; c < kFeatureChannels; ++c) w.put(s.stddev[c]);
  for (Index v = 0; v < s.coords.rows(); ++v) {
    for (int a = 0; a < 3; ++a) w.put<std::int32_t>(s.coords(v, a));
  }
  for (auto n : s.counts) w.put<std::uint32_t>(n);
  for (Index r = 0; r < s.features.rows(); ++r) {
    for (int c = 0; c < kFeatureChannels; ++c) w.put(static_cast<float>(s.features(r, c)));
  }
  return std::move(w.bytes());
}

EncodedSample deserialize_sample(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (r.get_raw(4) != "PRVX") throw FormatError("not a voxel sample container");
  if (r.get<std::uint32_t>() != 1) throw FormatError("unsupported voxel sample version");
  const auto num_voxels = r.get<std::uint32_t>();
  const auto num_points = r.get<std::uint32_t>();
  if (r.get<std::uint32_t>() != kFeatureChannels) throw FormatError("unexpected channel count");
  EncodedSample s;
  for (int a = 0; a < 3; ++a) s.dims[a] = r.get<std::int32_t>();
  for (int c = 0; c < kFeatureChannels; ++c) s.mean[c] = r.get<double>();
  for (int c = 0; c < kFeatureChannels; ++c) s.stddev[c] = r.get<double>();
  s.coords.resize(num_voxels, 3);
  for (Index v = 0; v < s.coords.rows(); ++v) {
    for (int a = 0; a < 3; ++a) s.coords(v, a) = r.get<std::int32_t>();
  }
  s.counts.resize(num_voxels);
  s.offsets.assign(num_voxels + 1, 0);
  for (std::uint32_t v = 0; v < num_voxels; ++v) {
    s.counts[v] = r.get<std::uint32_t>();
    s.offsets[v + 1] = s.offsets[v] + s.counts[v];
  }
  if (s.offsets.back() != num_points) throw FormatError("voxel counts do not sum to point count");
  s.features.resize(num_points, kFeatureChannels);
  for (Index p = 0; p < s.features.rows(); ++p) {
    for (int c = 0; c < kFeatureChannels; ++c) s.features(p, c) = r.get<float>();
  }
  if (!r.at_end()) throw FormatError("trailing bytes after voxel sample");
  return s;
}

void write_sample(const std::filesystem::path& path, const EncodedSample& sample) {
  const auto bytes = serialize_sample(sample);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace patchref
