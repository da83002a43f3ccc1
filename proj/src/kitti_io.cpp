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

#include "patchref/kitti_io.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <fmt/format.h>

#include "patchref/binary_io.hpp"
#include "text_util.hpp"

namespace patchref {

using detail::is_blank;
using detail::parse_double;
using detail::parse_int;
using detail::split_lines;
using detail::split_ws;

namespace {

constexpr std::size_t kBytesPerPoint = 4 * sizeof(float);

Eigen::Matrix4d homogeneous(const Eigen::Matrix<double, 3, 4>& m) {
  Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
  h.topRows<3>() = m;
  return h;
}

}  // namespace

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Moderate: return "moderate";
    case Difficulty::Hard: return "hard";
    case Difficulty::Ignored: return "ignored";
  }
  return "ignored";
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return bytes;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

// ---------------------------------------------------------------------------
// Point clouds

PointCloud decode_point_cloud(std::span<const std::byte> bytes, std::string frame_id) {
  if (bytes.size() % kBytesPerPoint != 0) {
    throw FormatError(fmt::format("point cloud byte length {} is not a multiple of {}",
                                  bytes.size(), kBytesPerPoint));
  }
  const auto n = static_cast<Index>(bytes.size() / kBytesPerPoint);
  PointCloud cloud;
  cloud.frame_id = std::move(frame_id);
  cloud.points.resize(n, 4);
  ByteReader reader(bytes);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < 4; ++c) {
      const float v = reader.get<float>();
      if (!std::isfinite(v)) throw DataError(fmt::format("point {} has a non-finite value", i));
      cloud.points(i, c) = v;
    }
    const double r = cloud.points(i, 3);
    if (r < 0.0 || r > 1.0) {
      throw DataError(fmt::format("point {} reflectance {} outside [0, 1]", i, r));
    }
  }
  return cloud;
}

std::vector<std::byte> encode_point_cloud(const PointCloud& cloud) {
  ByteWriter writer;
  writer.bytes().reserve(static_cast<std::size_t>(cloud.size()) * kBytesPerPoint);
  for (Index i = 0; i < cloud.size(); ++i) {
    for (Index c = 0; c < 4; ++c) writer.put(static_cast<float>(cloud.points(i, c)));
  }
  return std::move(writer.bytes());
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_point_cloud(bytes, path.stem().string());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  const auto bytes = encode_point_cloud(cloud);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Labels

namespace {

ScoredLabel parse_scored_line(std::string_view line, std::size_t line_number) {
  const auto t = split_ws(line);
  if (t.size() != 15 && t.size() != 16) {
    throw FormatError(
        fmt::format("line {}: expected 15 or 16 fields, found {}", line_number, t.size()));
  }
  ScoredLabel out;
  LabelRecord& r = out.record;
  r.class_name = std::string(t[0]);
  r.truncation = parse_double(t[1], line_number, "truncation");
  r.occlusion = parse_int(t[2], line_number, "occlusion");
  r.alpha = parse_double(t[3], line_number, "alpha");
  for (int i = 0; i < 4; ++i) r.bbox2d[i] = parse_double(t[4 + i], line_number, "bbox");
  for (int i = 0; i < 3; ++i) r.dims[i] = parse_double(t[8 + i], line_number, "dimensions");
  for (int i = 0; i < 3; ++i) r.location_cam[i] = parse_double(t[11 + i], line_number, "location");
  r.rotation_y = parse_double(t[14], line_number, "rotation_y");
  if (t.size() == 16) out.score = parse_double(t[15], line_number, "score");

  if (!r.is_dont_care()) {
    if (!(r.dims.array() > 0).all()) {
      throw DataError(fmt::format("line {}: non-positive dimensions", line_number));
    }
    if (!(r.bbox2d[2] > r.bbox2d[0] && r.bbox2d[3] > r.bbox2d[1])) {
      throw DataError(fmt::format("line {}: degenerate 2D box", line_number));
    }
  }
  return out;
}

}  // namespace

LabelRecord parse_label_line(std::string_view line, std::size_t line_number) {
  return parse_scored_line(line, line_number).record;
}

std::vector<ScoredLabel> parse_scored_labels(std::string_view text) {
  std::vector<ScoredLabel> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    out.push_back(parse_scored_line(lines[i], i + 1));
  }
  return out;
}

std::vector<LabelRecord> parse_labels(std::string_view text) {
  std::vector<LabelRecord> out;
  for (auto& s : parse_scored_labels(text)) out.push_back(std::move(s.record));
  return out;
}

std::vector<ScoredLabel> parse_scored_label_file(const std::filesystem::path& path) {
  try {
    return parse_scored_labels(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<LabelRecord> parse_label_file(const std::filesystem::path& path) {
  std::vector<LabelRecord> out;
  for (auto& s : parse_scored_label_file(path)) out.push_back(std::move(s.record));
  return out;
}

std::string format_label_line(const LabelRecord& r, std::optional<double> score) {
  std::string line = fmt::format(
      "{} {:.2f} {} {:.6f} {:.2f} {:.2f} {:.2f} {:.2f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} "
      "{:.6f}",
      r.class_name, r.truncation, r.occlusion, r.alpha, r.bbox2d[0], r.bbox2d[1], r.bbox2d[2],
      r.bbox2d[3], r.dims[0], r.dims[1], r.dims[2], r.location_cam[0], r.location_cam[1],
      r.location_cam[2], r.rotation_y);
  if (score) line += fmt::format(" {:.6f}", *score);
  return line;
}

// ---------------------------------------------------------------------------
// Calibration

Eigen::Matrix4d CalibrationSet::sensor_to_rect() const {
  Eigen::Matrix4d r0 = Eigen::Matrix4d::Identity();
  r0.topLeftCorner<3, 3>() = rect_rotation;
  return r0 * homogeneous(velo_to_cam);
}

Eigen::Matrix4d CalibrationSet::rect_to_sensor() const {
  const Eigen::Matrix4d forward = sensor_to_rect();
  Eigen::Matrix4d inverse;
  bool invertible = false;
  double det = 0;
  forward.computeInverseAndDetWithCheck(inverse, det, invertible, 1e-12);
  if (!invertible) throw NumericError(fmt::format("calibration is singular (det {})", det));
  return inverse;
}

CalibrationSet CalibrationSet::identity() {
  CalibrationSet c;
  c.velo_to_cam.leftCols<3>().setIdentity();
  c.cam_projection.leftCols<3>().setIdentity();
  return c;
}

CalibrationSet parse_calibration(std::string_view text) {
  std::map<std::string, std::vector<double>, std::less<>> entries;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto colon = lines[i].find(':');
    if (colon == std::string_view::npos) {
      throw FormatError(fmt::format("calib line {}: missing ':'", i + 1));
    }
    std::string key(lines[i].substr(0, colon));
    std::vector<double> values;
    for (auto tok : split_ws(lines[i].substr(colon + 1))) {
      values.push_back(parse_double(tok, i + 1, key));
    }
    entries[key] = std::move(values);
  }
  const auto require = [&](std::string_view key, std::size_t count) -> const std::vector<double>& {
    auto it = entries.find(key);
    if (it == entries.end()) throw FormatError(fmt::format("calib: missing '{}'", key));
    if (it->second.size() != count) {
      throw FormatError(fmt::format("calib: '{}' has {} values, expected {}", key,
                                    it->second.size(), count));
    }
    return it->second;
  };
  CalibrationSet calib;
  const auto& r0 = require("R0_rect", 9);
  const auto& tr = require("Tr_velo_to_cam", 12);
  const auto& p2 = require("P2", 12);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) calib.rect_rotation(r, c) = r0[static_cast<std::size_t>(3 * r + c)];
    for (int c = 0; c < 4; ++c) {
      calib.velo_to_cam(r, c) = tr[static_cast<std::size_t>(4 * r + c)];
      calib.cam_projection(r, c) = p2[static_cast<std::size_t>(4 * r + c)];
    }
  }
  const double ortho = (calib.rect_rotation * calib.rect_rotation.transpose() -
                        Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-4) throw DataError(fmt::format("calib: R0_rect not orthonormal ({})", ortho));
  return calib;
}

CalibrationSet parse_calibration_file(const std::filesystem::path& path) {
  try {
    return parse_calibration(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_calibration(const CalibrationSet& calib) {
  const auto row_major = [](const auto& m) {
    std::string s;
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) s += fmt::format(" {:.12e}", m(r, c));
    }
    return s;
  };
  Eigen::Matrix<double, 3, 4> p0 = calib.cam_projection;
  std::string out;
  out += "P0:" + row_major(p0) + "\n";
  out += "P1:" + row_major(p0) + "\n";
  out += "P2:" + row_major(calib.cam_projection) + "\n";
  out += "P3:" + row_major(p0) + "\n";
  out += "R0_rect:" + row_major(calib.rect_rotation) + "\n";
  out += "Tr_velo_to_cam:" + row_major(calib.velo_to_cam) + "\n";
  out += "Tr_imu_to_velo:" + row_major(Eigen::Matrix<double, 3, 4>::Identity().eval()) + "\n";
  return out;
}

Box3d camera_box_to_sensor_frame(const LabelRecord& label, const CalibrationSet& calib) {
  const Eigen::Matrix4d to_sensor = calib.rect_to_sensor();
  const Eigen::Vector4d bottom = to_sensor * label.location_cam.homogeneous();
  Box3d box;
  box.center = bottom.head<3>();
  box.center.z() += label.height() / 2;
  box.length = label.length();
  box.width = label.width();
  box.height = label.height();
  box.yaw = wrap_angle(-label.rotation_y - kPi / 2);
  return box;
}

LabelRecord sensor_box_to_camera_frame(const Box3d& box, const CalibrationSet& calib) {
  LabelRecord r;
  Eigen::Vector3d bottom = box.center;
  bottom.z() -= box.height / 2;
  r.location_cam = (calib.sensor_to_rect() * bottom.homogeneous()).head<3>();
  r.dims << box.height, box.width, box.length;
  r.rotation_y = wrap_angle(-box.yaw - kPi / 2);
  r.alpha = wrap_angle(r.rotation_y - std::atan2(r.location_cam.x(), r.location_cam.z()));
  return r;
}

Eigen::Vector4d project_bbox2d(const Box3d& box, const CalibrationSet& calib) {
  const BevCorners<double> bev = bev_corners(box);
  const Eigen::Matrix4d to_rect = calib.sensor_to_rect();
  Eigen::Vector4d extent(std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity(),
                         -std::numeric_limits<double>::infinity(),
                         -std::numeric_limits<double>::infinity());
  for (int i = 0; i < 4; ++i) {
    for (double z : {box.bottom(), box.top()}) {
      const Eigen::Vector4d p(bev(0, i), bev(1, i), z, 1.0);
      const Eigen::Vector3d img = calib.cam_projection * (to_rect * p);
      // Corners behind the image plane are clamped to a small depth.
      const double depth = std::max(img.z(), 1e-3);
      const double u = img.x() / depth;
      const double v = img.y() / depth;
      extent[0] = std::min(extent[0], u);
      extent[1] = std::min(extent[1], v);
      extent[2] = std::max(extent[2], u);
      extent[3] = std::max(extent[3], v);
    }
  }
  return extent;
}

Difficulty classify_difficulty(const LabelRecord& label) {
  struct Level {
    double min_height;
    int max_occlusion;
    double max_truncation;
    Difficulty difficulty;
  };
  static constexpr Level kLevels[] = {
      {40.0, 0, 0.15, Difficulty::Easy},
      {25.0, 1, 0.30, Difficulty::Moderate},
      {25.0, 2, 0.50, Difficulty::Hard},
  };
  const double h = label.bbox_height();
  for (const auto& level : kLevels) {
    if (h >= level.min_height && label.occlusion <= level.max_occlusion &&
        label.truncation <= level.max_truncation) {
      return level.difficulty;
    }
  }
  return Difficulty::Ignored;
}

// ---------------------------------------------------------------------------
// Splits and dataset layout

std::vector<std::string> parse_split(std::string_view text) {
  std::vector<std::string> ids;
  std::set<std::string, std::less<>> seen;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = split_ws(lines[i]);
    if (tokens.empty()) continue;
    if (tokens.size() != 1 || tokens[0].size() != 6 ||
        tokens[0].find_first_not_of("0123456789") != std::string_view::npos) {
      throw FormatError(fmt::format("split line {}: expected a 6-digit frame id", i + 1));
    }
    if (!seen.emplace(tokens[0]).second) {
      throw DataError(fmt::format("split line {}: duplicate id {}", i + 1, tokens[0]));
    }
    ids.emplace_back(tokens[0]);
  }
  return ids;
}

std::vector<std::string> load_split(const std::filesystem::path& path) {
  try {
    return parse_split(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::filesystem::path KittiDataset::velodyne_path(std::string_view id) const {
  return root_ / "velodyne" / (std::string(id) + ".bin");
}

std::filesystem::path KittiDataset::label_path(std::string_view id) const {
  return root_ / "label_2" / (std::string(id) + ".txt");
}

std::filesystem::path KittiDataset::calib_path(std::string_view id) const {
  return root_ / "calib" / (std::string(id) + ".txt");
}

bool KittiDataset::has_frame(std::string_view id) const {
  return std::filesystem::exists(velodyne_path(id)) && std::filesystem::exists(calib_path(id));
}

Frame KittiDataset::load_frame(std::string_view id) const {
  if (!has_frame(id)) {
    throw IoError(fmt::format("frame {} not found under {}", id, root_.string()));
  }
  Frame frame;
  frame.id = std::string(id);
  frame.cloud = read_point_cloud(velodyne_path(id));
  frame.cloud.frame_id = frame.id;
  frame.calib = parse_calibration_file(calib_path(id));
  if (std::filesystem::exists(label_path(id))) frame.labels = parse_label_file(label_path(id));
  return frame;
}

}  // namespace patchref
