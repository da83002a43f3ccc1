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

#include "patchref/synthetic.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

namespace patchref {

namespace {

double as_float(double v) { return static_cast<double>(static_cast<float>(v)); }

struct Placed {
  Box3d box;
  std::string class_name;
};

// Surface samples of a box, slightly pulled inside so containment holds.
void sample_surface(const Box3d& box, std::size_t n, Rng& rng, std::vector<Eigen::Vector4d>& out) {
  const double l = box.length * 0.98;
  const double w = box.width * 0.98;
  const double h = box.height * 0.98;
  const std::array<double, 5> area{l * h, l * h, w * h, w * h, l * w};
  const double total = area[0] + area[1] + area[2] + area[3] + area[4];
  const Eigen::Matrix2d r = rotation_2d(box.yaw);
  for (std::size_t i = 0; i < n; ++i) {
    double pick = rng.uniform(0.0, total);
    int face = 0;
    while (face < 4 && pick >= area[static_cast<std::size_t>(face)]) pick -= area[static_cast<std::size_t>(face++)];
    const double a = rng.uniform(-0.5, 0.5);
    const double b = rng.uniform(-0.5, 0.5);
    Eigen::Vector3d local;
    switch (face) {
      case 0: local = {a * l, w / 2, b * h}; break;
      case 1: local = {a * l, -w / 2, b * h}; break;
      case 2: local = {l / 2, a * w, b * h}; break;
      case 3: local = {-l / 2, a * w, b * h}; break;
      default: local = {a * l, b * w, h / 2}; break;
    }
    const Eigen::Vector2d xy = r * local.head<2>() + box.bev_center();
    out.emplace_back(xy.x(), xy.y(), box.center.z() + local.z(), rng.uniform(0.0, 1.0));
  }
}

LabelRecord dont_care(const Eigen::Vector4d& bbox) {
  LabelRecord r;
  r.class_name = "DontCare";
  r.truncation = -1;
  r.occlusion = -1;
  r.alpha = -10;
  r.bbox2d = bbox;
  r.dims << -1, -1, -1;
  r.location_cam << -1000, -1000, -1000;
  r.rotation_y = -10;
  return r;
}

}  // namespace

CalibrationSet reference_calibration() {
  CalibrationSet c;
  c.rect_rotation << 9.999239e-01, 9.837760e-03, -7.445048e-03, -9.869795e-03, 9.999421e-01,
      -4.351740e-03, 7.402527e-03, 4.419156e-03, 9.999631e-01;
  c.velo_to_cam << 7.533745e-03, -9.999714e-01, -6.166020e-04, -4.069766e-03, 1.480249e-02,
      7.280733e-04, -9.998902e-01, -7.631618e-02, 9.998621e-01, 7.523790e-03, 1.480755e-02,
      -2.717806e-01;
  c.cam_projection << 7.215377e+02, 0.000000e+00, 6.095593e+02, 4.485728e+01, 0.000000e+00,
      7.215377e+02, 1.728540e+02, 2.163791e-01, 0.000000e+00, 0.000000e+00, 1.000000e+00,
      2.745884e-03;
  return c;
}

Frame make_synthetic_frame(std::size_t index, const SyntheticConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  Frame frame;
  frame.id = fmt::format("{:06d}", index);
  frame.calib = reference_calibration();

  std::vector<Placed> placed;
  const auto try_place = [&](const std::string& cls, double l, double w, double h) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double d = rng.uniform(cfg.min_distance, cfg.max_distance);
      const double az = rng.uniform(-cfg.max_azimuth, cfg.max_azimuth);
      const double yaw = rng.uniform(-kPi, kPi);
      const Eigen::Vector2d c(d * std::cos(az), d * std::sin(az));
      const bool clear = std::all_of(placed.begin(), placed.end(), [&](const Placed& p) {
        return (p.box.bev_center() - c).norm() >= 7.0;
      });
      if (!clear) continue;
      placed.push_back({make_box(c.x(), c.y(), cfg.ground_z + h / 2, l, w, h, yaw), cls});
      return true;
    }
    return false;
  };

  const auto n_cars = cfg.min_cars + static_cast<int>(rng.index(static_cast<std::size_t>(cfg.max_cars - cfg.min_cars + 1)));
  for (int k = 0; k < n_cars; ++k) {
    try_place("Car", rng.uniform(3.5, 4.6), rng.uniform(1.5, 1.9), rng.uniform(1.4, 1.7));
  }
  const bool van = rng.bernoulli(0.3);
  const bool pedestrian = rng.bernoulli(0.2);
  const bool dont_care_box = rng.bernoulli(0.2);
  if (cfg.extra_classes && van) try_place("Van", rng.uniform(4.5, 5.2), 1.9, rng.uniform(2.0, 2.3));
  if (cfg.extra_classes && pedestrian) try_place("Pedestrian", 0.8, 0.6, 1.7);

  std::vector<Eigen::Vector4d> pts;
  for (std::size_t i = 0; i < cfg.ground_points; ++i) {
    pts.emplace_back(rng.uniform(0.0, 50.0), rng.uniform(-25.0, 25.0),
                     cfg.ground_z + rng.uniform(-0.02, 0.02), rng.uniform(0.0, 1.0));
  }
  static constexpr std::array<double, 4> kTruncation{0.0, 0.1, 0.25, 0.45};
  for (const auto& p : placed) {
    const double d = p.box.bev_center().norm();
    const auto n = static_cast<std::size_t>(std::clamp(4000.0 / d, 40.0, 600.0));
    sample_surface(p.box, n, rng, pts);

    LabelRecord label = sensor_box_to_camera_frame(p.box, frame.calib);
    label.class_name = p.class_name;
    label.bbox2d = project_bbox2d(p.box, frame.calib);
    label.occlusion = static_cast<int>(rng.index(3));
    label.truncation = kTruncation[rng.index(kTruncation.size())];
    // Round-trip through the text format so memory and disk agree.
    frame.labels.push_back(parse_label_line(format_label_line(label), 1));
  }
  if (cfg.extra_classes && dont_care_box) {
    frame.labels.push_back(parse_label_line(format_label_line(dont_care({700, 180, 760, 210})), 1));
  }

  frame.cloud.frame_id = frame.id;
  frame.cloud.points.resize(static_cast<Index>(pts.size()), 4);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int c = 0; c < 4; ++c) frame.cloud.points(static_cast<Index>(i), c) = as_float(pts[i][c]);
  }
  return frame;
}

std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root,
                                                 const SyntheticConfig& cfg) {
  namespace fs = std::filesystem;
  for (const char* sub : {"velodyne", "label_2", "calib", "ImageSets"}) fs::create_directories(root / sub);
  const KittiDataset dataset(root);
  std::vector<std::string> ids;
  std::string all;
  std::string train;
  std::string val;
  for (std::size_t i = 0; i < cfg.num_frames; ++i) {
    const Frame f = make_synthetic_frame(i, cfg);
    write_point_cloud(dataset.velodyne_path(f.id), f.cloud);
    std::string labels;
    for (const auto& l : f.labels) labels += format_label_line(l) + "\n";
    write_text_file(dataset.label_path(f.id), labels);
    write_text_file(dataset.calib_path(f.id), format_calibration(f.calib));
    all += f.id + "\n";
    (i % 2 == 0 ? train : val) += f.id + "\n";
    ids.push_back(f.id);
  }
  write_text_file(root / "ImageSets" / "all.txt", all);
  write_text_file(root / "ImageSets" / "train.txt", train);
  write_text_file(root / "ImageSets" / "val.txt", val);
  return ids;
}

}  // namespace patchref
