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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <doctest.h>

#include "patchref/kitti_io.hpp"
#include "patchref/synthetic.hpp"
#include "test_util.hpp"

using namespace patchref;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<std::byte>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Minimal independent reader: fread floats one at a time.
std::size_t count_points_raw(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.c_str(), "rb");
  REQUIRE(f != nullptr);
  float buf[4];
  std::size_t n = 0;
  while (std::fread(buf, sizeof(float), 4, f) == 4) ++n;
  std::fclose(f);
  return n;
}

const char* kCarLine =
    "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59";

}  // namespace

TEST_CASE("point cloud: two points in file order") {
  const auto dir = test::scratch_dir("two_points");
  write_bytes(dir / "a.bin", test::float_bytes({1, 2, 3, 0.5f, 4, 5, 6, 0.0f}));
  const PointCloud c = read_point_cloud(dir / "a.bin");
  REQUIRE(c.size() == 2);
  CHECK(c.points(0, 0) == 1);
  CHECK(c.points(0, 1) == 2);
  CHECK(c.points(0, 2) == 3);
  CHECK(c.points(0, 3) == 0.5);
  CHECK(c.points(1, 2) == 6);
  CHECK(c.frame_id == "a");
}

TEST_CASE("point cloud: empty file") {
  const auto dir = test::scratch_dir("empty");
  write_bytes(dir / "e.bin", {});
  CHECK(read_point_cloud(dir / "e.bin").empty());
}

TEST_CASE("point cloud: malformed input") {
  auto bytes = test::float_bytes({1, 2, 3, 0.5f});
  bytes.pop_back();
  CHECK_THROWS_AS(decode_point_cloud(bytes), FormatError);

  const float nan = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(decode_point_cloud(test::float_bytes({0, 0, 0, 0, 1, nan, 0, 0})), DataError);
  try {
    decode_point_cloud(test::float_bytes({0, 0, 0, 0, 1, nan, 0, 0}));
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("point 1") != std::string::npos);
  }
  CHECK_THROWS_AS(decode_point_cloud(test::float_bytes({0, 0, 0, 1.5f})), DataError);
  CHECK_THROWS_AS(read_point_cloud("/nonexistent/x.bin"), IoError);
}

TEST_CASE("point cloud: count agrees with a byte-level reader") {
  const auto dir = test::scratch_dir("raw_count");
  const Frame f = make_synthetic_frame(3);
  write_point_cloud(dir / "f.bin", f.cloud);
  const PointCloud back = read_point_cloud(dir / "f.bin");
  CHECK(static_cast<std::size_t>(back.size()) == count_points_raw(dir / "f.bin"));
  CHECK(static_cast<std::size_t>(back.size()) * 16 == std::filesystem::file_size(dir / "f.bin"));
  CHECK(back.points == f.cloud.points);
}

TEST_CASE("labels: field-by-field parse of a devkit line") {
  const auto labels = parse_labels(kCarLine);
  REQUIRE(labels.size() == 1);
  const auto& l = labels[0];
  CHECK(l.class_name == "Car");
  CHECK(l.truncation == 0.0);
  CHECK(l.occlusion == 0);
  CHECK(l.alpha == doctest::Approx(-1.58));
  CHECK(l.bbox2d[0] == doctest::Approx(587.01));
  CHECK(l.bbox2d[3] == doctest::Approx(200.12));
  CHECK(l.dims[0] == doctest::Approx(1.65));
  CHECK(l.dims[1] == doctest::Approx(1.67));
  CHECK(l.dims[2] == doctest::Approx(3.64));
  CHECK(l.location_cam[0] == doctest::Approx(-0.65));
  CHECK(l.location_cam[1] == doctest::Approx(1.71));
  CHECK(l.location_cam[2] == doctest::Approx(46.70));
  CHECK(l.rotation_y == doctest::Approx(-1.59));
}

TEST_CASE("labels: empty text, score field, DontCare kept") {
  CHECK(parse_labels("").empty());
  const auto scored = parse_scored_labels(std::string(kCarLine) + " 0.83\n");
  REQUIRE(scored.size() == 1);
  REQUIRE(scored[0].score.has_value());
  CHECK(*scored[0].score == doctest::Approx(0.83));
  const auto dc = parse_labels("DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\n");
  REQUIRE(dc.size() == 1);
  CHECK(dc[0].is_dont_care());
}

TEST_CASE("labels: wrong field count names the line") {
  const std::string bad = "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70";
  CHECK_THROWS_AS(parse_labels(bad), FormatError);
  try {
    parse_labels(bad);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_labels("Car 0.00 0 -1.58 x 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59"),
                  DataError);
}

TEST_CASE("labels: format/parse round trip") {
  const auto l = parse_labels(kCarLine)[0];
  const auto back = parse_labels(format_label_line(l))[0];
  CHECK(back.class_name == l.class_name);
  CHECK((back.dims - l.dims).norm() < 1e-9);
  CHECK((back.location_cam - l.location_cam).norm() < 1e-9);
  CHECK(back.rotation_y == doctest::Approx(l.rotation_y));
}

TEST_CASE("frames: identity calibration lifts the centroid by h/2") {
  LabelRecord l;
  l.class_name = "Car";
  l.dims << 2.0, 1.6, 4.0;
  l.location_cam.setZero();
  l.rotation_y = -kPi / 2;
  const Box3d b = camera_box_to_sensor_frame(l, CalibrationSet::identity());
  CHECK(b.center.z() == doctest::Approx(1.0));
  CHECK(b.yaw == doctest::Approx(0.0));  // length along sensor x
  CHECK(b.length == 4.0);
}

TEST_CASE("frames: sensor/camera conversion round trip") {
  const CalibrationSet calib = reference_calibration();
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Box3d b = make_box(rng.uniform(2.0, 60.0), rng.uniform(-20.0, 20.0), rng.uniform(-2.0, 0.0), 4.0, 1.7,
                             1.5, rng.uniform(-kPi, kPi));
    const LabelRecord l = sensor_box_to_camera_frame(b, calib);
    CHECK(test::max_box_error(camera_box_to_sensor_frame(l, calib), b) < 1e-9);
  }
}

TEST_CASE("frames: containment agrees between sensor and camera frames") {
  // Oracle: move points into the rectified camera frame and test them against
  // the camera-frame box (bottom-center location, y down, yaw rotation_y).
  // The camera vertical is tilted against the sensor z axis by up to ~0.02
  // rad with real calibration, so the two boxes differ by a few cm at the
  // faces; membership has to agree outside that band.
  constexpr double kBand = 0.08;
  const CalibrationSet calib = reference_calibration();
  Frame f = make_synthetic_frame(5);
  // synthetic cars are hollow shells; add a volume of points around each box
  Rng rng(5);
  std::vector<Eigen::Vector4d> extra;
  for (const auto& l : f.labels) {
    if (l.is_dont_care()) continue;
    const Box3d b = camera_box_to_sensor_frame(l, calib);
    for (int k = 0; k < 400; ++k) {
      const Eigen::Vector3d local(rng.uniform(-0.8, 0.8) * b.length, rng.uniform(-0.8, 0.8) * b.width,
                                  rng.uniform(-0.8, 0.8) * b.height);
      const Eigen::Vector2d xy = rotation_2d(b.yaw) * local.head<2>() + b.bev_center();
      extra.emplace_back(xy.x(), xy.y(), b.center.z() + local.z(), 0.5);
    }
  }
  PointMatrix grown(f.cloud.size() + static_cast<Index>(extra.size()), 4);
  grown.topRows(f.cloud.size()) = f.cloud.points;
  for (std::size_t k = 0; k < extra.size(); ++k) grown.row(f.cloud.size() + static_cast<Index>(k)) = extra[k];
  f.cloud.points = grown;
  const Eigen::Matrix4d to_rect = calib.sensor_to_rect();
  for (const auto& l : f.labels) {
    if (l.is_dont_care()) continue;
    const Box3d b = camera_box_to_sensor_frame(l, calib);
    const auto ours = points_in_box(f.cloud, b, 0.0);
    std::vector<char> inside(static_cast<std::size_t>(f.cloud.size()), 0);
    for (Index i : ours) inside[static_cast<std::size_t>(i)] = 1;
    std::size_t clear_inside = 0;
    std::size_t banded = 0;
    for (Index i = 0; i < f.cloud.size(); ++i) {
      const Eigen::Vector4d p(f.cloud.points(i, 0), f.cloud.points(i, 1), f.cloud.points(i, 2), 1.0);
      const Eigen::Vector3d c = (to_rect * p).head<3>() - l.location_cam;
      const double cr = std::cos(l.rotation_y);
      const double sr = std::sin(l.rotation_y);
      const double lx = cr * c.x() - sr * c.z();  // along the length
      const double lz = sr * c.x() + cr * c.z();  // along the width
      // signed distance to the nearest face, positive inside
      const double margin = std::min({l.length() / 2 - std::abs(lx), l.width() / 2 - std::abs(lz), -c.y(),
                                      c.y() + l.height()});
      if (std::abs(margin) <= kBand) {
        ++banded;
        continue;
      }
      const bool oracle_inside = margin > 0;
      CHECK(oracle_inside == static_cast<bool>(inside[static_cast<std::size_t>(i)]));
      clear_inside += oracle_inside ? 1 : 0;
    }
    CHECK(clear_inside > 0);
    CHECK(banded < static_cast<std::size_t>(f.cloud.size()) / 5);
  }
}

TEST_CASE("difficulty: devkit thresholds") {
  LabelRecord l;
  l.bbox2d << 0, 0, 10, 40;
  CHECK(classify_difficulty(l) == Difficulty::Easy);
  l.bbox2d[3] = 39.9;
  CHECK(classify_difficulty(l) == Difficulty::Moderate);
  l.occlusion = 2;
  CHECK(classify_difficulty(l) == Difficulty::Hard);
  l.truncation = 0.51;
  CHECK(classify_difficulty(l) == Difficulty::Ignored);
  l.truncation = 0;
  l.occlusion = 0;
  l.bbox2d[3] = 24.9;
  CHECK(classify_difficulty(l) == Difficulty::Ignored);
}

TEST_CASE("calibration: parse/format round trip and singular calib") {
  const CalibrationSet calib = reference_calibration();
  const CalibrationSet back = parse_calibration(format_calibration(calib));
  CHECK((back.rect_rotation - calib.rect_rotation).norm() < 1e-12);
  CHECK((back.velo_to_cam - calib.velo_to_cam).norm() < 1e-12);
  CHECK((back.cam_projection - calib.cam_projection).norm() < 1e-12);
  CHECK((calib.rect_to_sensor() * calib.sensor_to_rect() - Eigen::Matrix4d::Identity()).norm() < 1e-9);

  CalibrationSet singular = calib;
  singular.velo_to_cam.setZero();
  CHECK_THROWS_AS(singular.rect_to_sensor(), NumericError);
  CHECK_THROWS_AS(parse_calibration("P2: 1 2 3\n"), FormatError);
}

TEST_CASE("splits and dataset layout") {
  CHECK(parse_split("000001\n\n000004\n") == std::vector<std::string>{"000001", "000004"});
  const auto root = test::scratch_dir("dataset");
  SyntheticConfig cfg;
  cfg.num_frames = 3;
  const auto ids = write_synthetic_dataset(root, cfg);
  REQUIRE(ids.size() == 3);
  const KittiDataset ds(root);
  CHECK(ds.has_frame("000002"));
  CHECK_FALSE(ds.has_frame("000099"));
  CHECK_THROWS_AS(ds.load_frame("000099"), IoError);
  const Frame f = ds.load_frame("000001");
  const Frame mem = make_synthetic_frame(1, cfg);
  CHECK(f.cloud.points == mem.cloud.points);
  CHECK(f.labels.size() == mem.labels.size());
  CHECK(load_split(root / "ImageSets" / "train.txt") == std::vector<std::string>{"000000", "000002"});
}
