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

// On-disk patch containers, all little-endian.
//
// Training database (patches.bin):
//   "PRPD" u32 version=1 u64 count u64 offset[count]
//   record: u32 n, f32 points[n][4], f64 box[7] (x y z l w h yaw),
//           f64 crop_center[2], f64 noise_r, f64 noise_phi, u64 aug_seed,
//           u32 steps, {u8 kind, u8 scope, f64 value}[steps],
//           str frame_id, i32 object_index, u8 difficulty,
//           str surface_frame_id, i32 surface_object_index, u8 resampled
//   (str = u32 length + bytes; offsets are absolute byte positions)
// Index (patches.idx): "record frame object difficulty surface_frame
// surface_object resampled points" per line.
//
// Extracted inference patches (patches.bin):
//   "PRIP" u32 version=1 u64 count u64 offset[count]
//   record: str frame_id, u32 proposal_index, f64 score, f64 rotation,
//           f64 scene_center[2], f64 center[2], u64 removed, u32 n,
//           f32 points[n][4]
// Rotation log (rotation_log.txt): "record frame proposal rotation
// scene_x scene_y" with round-trip precision.

#ifndef PATCHREF_PATCH_DB_HPP
#define PATCHREF_PATCH_DB_HPP

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "patchref/patch_pipeline.hpp"

namespace patchref {

inline constexpr const char* kPatchDbFile = "patches.bin";
inline constexpr const char* kPatchIndexFile = "patches.idx";
inline constexpr const char* kRotationLogFile = "rotation_log.txt";

std::vector<std::byte> serialize_patch_db(std::span<const Patch> patches);
std::string format_patch_index(std::span<const Patch> patches);

/// Writes patches.bin and patches.idx into `dir` (created if needed).
void write_patch_db(const std::filesystem::path& dir, std::span<const Patch> patches);

/// Random access over a serialized training database. Points come back at
/// float precision.
class PatchDbReader {
 public:
  explicit PatchDbReader(std::vector<std::byte> bytes);
  static PatchDbReader open(const std::filesystem::path& path);

  std::size_t size() const { return offsets_.size(); }
  /// Throws ContractError when out of range.
  Patch read(std::size_t index) const;
  std::vector<Patch> read_all() const;

 private:
  std::vector<std::byte> bytes_;
  std::vector<std::uint64_t> offsets_;
};

struct ExtractedPatch {
  std::string frame_id;
  std::uint32_t proposal_index = 0;
  double score = 0;
  InferencePatch patch;
};

std::vector<std::byte> serialize_extracted(std::span<const ExtractedPatch> patches);
std::vector<ExtractedPatch> deserialize_extracted(std::span<const std::byte> bytes);
std::string format_rotation_log(std::span<const ExtractedPatch> patches);

void write_extracted(const std::filesystem::path& dir, std::span<const ExtractedPatch> patches);

}  // namespace patchref

#endif  // PATCHREF_PATCH_DB_HPP
