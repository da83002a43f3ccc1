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

// KITTI object benchmark ingestion: velodyne .bin clouds, label_2 text
// files, calib files and split lists, plus camera <-> sensor box
// conversion and devkit difficulty classes.

#ifndef PATCHREF_KITTI_IO_HPP
#define PATCHREF_KITTI_IO_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "patchref/geometry.hpp"
#include "patchref/point_cloud.hpp"

namespace patchref {

struct LabelRecord {
  std::string class_name;
  double truncation = 0;
  int occlusion = 0;
  double alpha = 0;
  Eigen::Vector4d bbox2d = Eigen::Vector4d::Zero();  // left, top, right, bottom (px)
  Eigen::Vector3d dims = Eigen::Vector3d::Zero();    // h, w, l (m)
  Eigen::Vector3d location_cam = Eigen::Vector3d::Zero();  // bottom center, camera frame
  double rotation_y = 0;

  bool is_dont_care() const { return class_name == "DontCare"; }
  double bbox_height() const { return bbox2d[3] - bbox2d[1]; }
  double height() const { return dims[0]; }
  double width() const { return dims[1]; }
  double length() const { return dims[2]; }
};

/// A label line together with the optional trailing score field.
struct ScoredLabel {
  LabelRecord record;
  std::optional<double> score;
};

struct CalibrationSet {
  Eigen::Matrix3d rect_rotation = Eigen::Matrix3d::Identity();                    // R0_rect
  Eigen::Matrix<double, 3, 4> velo_to_cam = Eigen::Matrix<double, 3, 4>::Zero();  // Tr_velo_to_cam
  Eigen::Matrix<double, 3, 4> cam_projection = Eigen::Matrix<double, 3, 4>::Zero();  // P2

  /// Homogeneous sensor -> rectified camera transform (R0 * Tr).
  Eigen::Matrix4d sensor_to_rect() const;
  /// Inverse of sensor_to_rect(); throws NumericError when singular.
  Eigen::Matrix4d rect_to_sensor() const;

  /// Identity rotation/translation between frames, unit projection.
  static CalibrationSet identity();
};

enum class Difficulty { Easy = 0, Moderate = 1, Hard = 2, Ignored = 3 };

std::string_view to_string(Difficulty d);

// -- point clouds ----------------------------------------------------------

PointCloud decode_point_cloud(std::span<const std::byte> bytes, std::string frame_id = {});
std::vector<std::byte> encode_point_cloud(const PointCloud& cloud);

/// Throws FormatError for lengths not divisible by 16, DataError naming the
/// point index for non-finite values or reflectance outside [0, 1].
PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

// -- labels ----------------------------------------------------------------

LabelRecord parse_label_line(std::string_view line, std::size_t line_number);
std::vector<ScoredLabel> parse_scored_labels(std::string_view text);
std::vector<LabelRecord> parse_labels(std::string_view text);
std::vector<LabelRecord> parse_label_file(const std::filesystem::path& path);
std::vector<ScoredLabel> parse_scored_label_file(const std::filesystem::path& path);
std::string format_label_line(const LabelRecord& label, std::optional<double> score = {});

// -- calibration -----------------------------------------------------------

CalibrationSet parse_calibration(std::string_view text);
CalibrationSet parse_calibration_file(const std::filesystem::path& path);
std::string format_calibration(const CalibrationSet& calib);

/// Camera-frame label -> sensor-frame box whose center is the centroid.
/// yaw = -rotation_y - pi/2.
Box3d camera_box_to_sensor_frame(const LabelRecord& label, const CalibrationSet& calib);

/// Inverse of camera_box_to_sensor_frame: fills dims, location_cam and
/// rotation_y of a label record (other fields default).
LabelRecord sensor_box_to_camera_frame(const Box3d& box, const CalibrationSet& calib);

/// Axis-aligned image-plane extent of the projected box corners.
Eigen::Vector4d project_bbox2d(const Box3d& box, const CalibrationSet& calib);

/// KITTI devkit difficulty: 40/25/25 px height, occlusion 0/1/2,
/// truncation 0.15/0.30/0.50.
Difficulty classify_difficulty(const LabelRecord& label);

// -- splits and dataset layout ---------------------------------------------

std::vector<std::string> parse_split(std::string_view text);
std::vector<std::string> load_split(const std::filesystem::path& path);

struct Frame {
  std::string id;
  PointCloud cloud;
  std::vector<LabelRecord> labels;
  CalibrationSet calib;
};

/// KITTI training layout: <root>/velodyne/<id>.bin, <root>/label_2/<id>.txt,
/// <root>/calib/<id>.txt.
class KittiDataset {
 public:
  explicit KittiDataset(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path velodyne_path(std::string_view id) const;
  std::filesystem::path label_path(std::string_view id) const;
  std::filesystem::path calib_path(std::string_view id) const;

  bool has_frame(std::string_view id) const;
  /// Labels are optional (test split); missing cloud or calib throws IoError.
  Frame load_frame(std::string_view id) const;

 private:
  std::filesystem::path root_;
};

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace patchref

#endif  // PATCHREF_KITTI_IO_HPP
