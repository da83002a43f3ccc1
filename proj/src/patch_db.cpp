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

#include "patchref/patch_db.hpp"

#include <fmt/format.h>

#include "patchref/binary_io.hpp"
#include "patchref/kitti_io.hpp"

namespace patchref {

namespace {

constexpr std::uint32_t kVersion1 = 1;

void put_points(ByteWriter& w, const PointMatrix& points) {
  w.put(static_cast<std::uint32_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) {
    for (int c = 0; c < 4; ++c) w.put(static_cast<float>(points(i, c)));
  }
}

PointMatrix get_points(ByteReader& r) {
  const auto n = r.get<std::uint32_t>();
  if (static_cast<std::size_t>(n) * 16 > r.remaining()) throw FormatError("point block overruns container");
  PointMatrix points(n, 4);
  for (Index i = 0; i < points.rows(); ++i) {
    for (int c = 0; c < 4; ++c) points(i, c) = r.get<float>();
  }
  return points;
}

void put_box(ByteWriter& w, const Box3d& b) {
  for (double v : {b.center.x(), b.center.y(), b.center.z(), b.length, b.width, b.height, b.yaw}) w.put(v);
}

Box3d get_box(ByteReader& r) {
  Box3d b;
  b.center.x() = r.get<double>();
  b.center.y() = r.get<double>();
  b.center.z() = r.get<double>();
  b.length = r.get<double>();
  b.width = r.get<double>();
  b.height = r.get<double>();
  b.yaw = r.get<double>();
  return b;
}

/// Header with a placeholder offset table; returns the table position.
std::size_t begin_container(ByteWriter& w, std::string_view magic, std::size_t count) {
  w.put_bytes(magic);
  w.put(kVersion1);
  w.put(static_cast<std::uint64_t>(count));
  const std::size_t table = w.bytes().size();
  for (std::size_t i = 0; i < count; ++i) w.put<std::uint64_t>(0);
  return table;
}

void set_offset(ByteWriter& w, std::size_t table, std::size_t i, std::uint64_t offset) {
  ByteWriter tmp;
  tmp.put(offset);
  std::copy(tmp.bytes().begin(), tmp.bytes().end(),
            w.bytes().begin() + static_cast<std::ptrdiff_t>(table + 8 * i));
}

std::vector<std::uint64_t> read_offsets(ByteReader& r, std::string_view magic, std::size_t total) {
  if (r.get_raw(4) != magic) throw FormatError(fmt::format("not a {} container", magic));
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion1) throw FormatError(fmt::format("unsupported container version {}", version));
  const auto count = r.get<std::uint64_t>();
  if (count > r.remaining() / 8) throw FormatError("offset table overruns container");
  std::vector<std::uint64_t> offsets(count);
  for (auto& o : offsets) {
    o = r.get<std::uint64_t>();
    if (o >= total) throw FormatError("record offset past end of container");
  }
  return offsets;
}

}  // namespace

std::vector<std::byte> serialize_patch_db(std::span<const Patch> patches) {
  ByteWriter w;
  const std::size_t table = begin_container(w, "PRPD", patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    set_offset(w, table, i, w.bytes().size());
    put_points(w, p.points);
    put_box(w, p.box);
    w.put(p.crop_center.x());
    w.put(p.crop_center.y());
    w.put(p.noise.radius);
    w.put(p.noise.angle);
    w.put(p.log.seed);
    w.put(static_cast<std::uint32_t>(p.log.steps.size()));
    for (const auto& s : p.log.steps) {
      w.put(static_cast<std::uint8_t>(s.kind));
      w.put(static_cast<std::uint8_t>(s.scope));
      w.put(s.value);
    }
    w.put_string(p.frame_id);
    w.put<std::int32_t>(p.object_index);
    w.put(static_cast<std::uint8_t>(p.difficulty));
    w.put_string(p.surface_frame_id);
    w.put<std::int32_t>(p.surface_object_index);
    w.put<std::uint8_t>(p.surface_resampled ? 1 : 0);
  }
  return std::move(w.bytes());
}

std::string format_patch_index(std::span<const Patch> patches) {
  std::string s;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    s += fmt::format("{} {} {} {} {} {} {} {}\n", i, p.frame_id, p.object_index, to_string(p.difficulty),
                     p.surface_frame_id, p.surface_object_index, p.surface_resampled ? 1 : 0,
                     p.points.rows());
  }
  return s;
}

void write_patch_db(const std::filesystem::path& dir, std::span<const Patch> patches) {
  std::filesystem::create_directories(dir);
  write_file_bytes(dir / kPatchDbFile, serialize_patch_db(patches));
  write_text_file(dir / kPatchIndexFile, format_patch_index(patches));
}

PatchDbReader::PatchDbReader(std::vector<std::byte> bytes) : bytes_(std::move(bytes)) {
  ByteReader r(bytes_);
  offsets_ = read_offsets(r, "PRPD", bytes_.size());
}

PatchDbReader PatchDbReader::open(const std::filesystem::path& path) {
  try {
    return PatchDbReader(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Patch PatchDbReader::read(std::size_t index) const {
  if (index >= offsets_.size()) {
    throw ContractError(fmt::format("patch index {} out of range (size {})", index, offsets_.size()));
  }
  ByteReader r(std::span<const std::byte>(bytes_).subspan(offsets_[index]));
  Patch p;
  p.points = get_points(r);
  p.box = get_box(r);
  p.crop_center.x() = r.get<double>();
  p.crop_center.y() = r.get<double>();
  p.noise.radius = r.get<double>();
  p.noise.angle = r.get<double>();
  p.log.seed = r.get<std::uint64_t>();
  const auto steps = r.get<std::uint32_t>();
  for (std::uint32_t s = 0; s < steps; ++s) {
    const auto kind = r.get<std::uint8_t>();
    const auto scope = r.get<std::uint8_t>();
    if (kind > 3 || scope > 1) throw FormatError("bad augmentation step");
    p.log.steps.push_back({static_cast<AugmentKind>(kind), static_cast<AugmentScope>(scope), r.get<double>()});
  }
  p.frame_id = r.get_string();
  p.object_index = r.get<std::int32_t>();
  const auto difficulty = r.get<std::uint8_t>();
  if (difficulty > 3) throw FormatError("bad difficulty code");
  p.difficulty = static_cast<Difficulty>(difficulty);
  p.surface_frame_id = r.get_string();
  p.surface_object_index = r.get<std::int32_t>();
  p.surface_resampled = r.get<std::uint8_t>() != 0;
  return p;
}

std::vector<Patch> PatchDbReader::read_all() const {
  std::vector<Patch> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(read(i));
  return out;
}

std::vector<std::byte> serialize_extracted(std::span<const ExtractedPatch> patches) {
  ByteWriter w;
  const std::size_t table = begin_container(w, "PRIP", patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& e = patches[i];
    set_offset(w, table, i, w.bytes().size());
    w.put_string(e.frame_id);
    w.put(e.proposal_index);
    w.put(e.score);
    w.put(e.patch.rotation);
    w.put(e.patch.scene_center.x());
    w.put(e.patch.scene_center.y());
    w.put(e.patch.center.x());
    w.put(e.patch.center.y());
    w.put(static_cast<std::uint64_t>(e.patch.removed_points));
    put_points(w, e.patch.points);
  }
  return std::move(w.bytes());
}

std::vector<ExtractedPatch> deserialize_extracted(std::span<const std::byte> bytes) {
  ByteReader head(bytes);
  const auto offsets = read_offsets(head, "PRIP", bytes.size());
  std::vector<ExtractedPatch> out;
  for (auto offset : offsets) {
    ByteReader r(bytes.subspan(offset));
    ExtractedPatch e;
    e.frame_id = r.get_string();
    e.proposal_index = r.get<std::uint32_t>();
    e.score = r.get<double>();
    e.patch.rotation = r.get<double>();
    e.patch.scene_center.x() = r.get<double>();
    e.patch.scene_center.y() = r.get<double>();
    e.patch.center.x() = r.get<double>();
    e.patch.center.y() = r.get<double>();
    e.patch.removed_points = r.get<std::uint64_t>();
    e.patch.points = get_points(r);
    out.push_back(std::move(e));
  }
  return out;
}

std::string format_rotation_log(std::span<const ExtractedPatch> patches) {
  std::string s;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& e = patches[i];
    s += fmt::format("{} {} {} {:.17g} {:.17g} {:.17g}\n", i, e.frame_id, e.proposal_index,
                     e.patch.rotation, e.patch.scene_center.x(), e.patch.scene_center.y());
  }
  return s;
}

void write_extracted(const std::filesystem::path& dir, std::span<const ExtractedPatch> patches) {
  std::filesystem::create_directories(dir);
  write_file_bytes(dir / kPatchDbFile, serialize_extracted(patches));
  write_text_file(dir / kRotationLogFile, format_rotation_log(patches));
}

}  // namespace patchref
