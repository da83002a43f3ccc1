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

#ifndef PATCHREF_DETECTION_HPP
#define PATCHREF_DETECTION_HPP

#include <string>

#include "patchref/geometry.hpp"

namespace patchref {

/// Scored box in the scene (sensor) frame.
struct DetectionRecord {
  Box3d box;
  double score = 0;
  std::string frame_id;
};

}  // namespace patchref

#endif  // PATCHREF_DETECTION_HPP
