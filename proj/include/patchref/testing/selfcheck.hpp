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

#ifndef PATCHREF_TESTING_SELFCHECK_HPP
#define PATCHREF_TESTING_SELFCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace patchref::testing {

struct SelfcheckOptions {
  std::uint64_t seed = 0;
  /// Test mode: perturbs decoded boxes inside the codec suite.
  bool inject_codec_fault = false;
};

struct SuiteResult {
  std::string name;  // voxelizer, iou_raster, codec, gradients, nms
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

std::vector<SuiteResult> run_selfcheck(const SelfcheckOptions& options = {});

}  // namespace patchref::testing

#endif  // PATCHREF_TESTING_SELFCHECK_HPP
