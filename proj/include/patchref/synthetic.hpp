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

// Small KITTI-layout scenes for tests and demos: a jittered ground plane
// at sensor height plus cars sampled on their box surfaces, with a
// calibration taken from a real recording.

#ifndef PATCHREF_SYNTHETIC_HPP
#define PATCHREF_SYNTHETIC_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "patchref/kitti_io.hpp"

namespace patchref {

struct SyntheticConfig {
  std::size_t num_frames = 20;
  std::uint64_t seed = 7;
  int min_cars = 2;
  int max_cars = 5;
  std::size_t ground_points = 3000;
  double ground_z = -1.73;
  double min_distance = 6.0;
  double max_distance = 40.0;
  double max_azimuth = 0.6;  // rad, keeps cars in the camera view
  bool extra_classes = true;  // a Van, Pedestrian or DontCare now and then
};

CalibrationSet reference_calibration();

/// Frame `index` of the synthetic set, id = zero-padded index. Labels are
/// exactly what write_synthetic_dataset puts on disk.
Frame make_synthetic_frame(std::size_t index, const SyntheticConfig& config = {});

/// velodyne/, label_2/, calib/ and ImageSets/{all,train,val}.txt (even ids
/// train, odd ids val). Returns the frame ids.
std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root,
                                                 const SyntheticConfig& config = {});

}  // namespace patchref

#endif  // PATCHREF_SYNTHETIC_HPP
