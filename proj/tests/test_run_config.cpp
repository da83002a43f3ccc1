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

#include <algorithm>
#include <fstream>
#include <string>

#include <doctest.h>

#include "patchref/run_config.hpp"
#include "test_util.hpp"

using namespace patchref;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults validate and map onto module configs") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  const auto p = c.patch_config();
  CHECK(p.surface_window == 64);
  CHECK(p.surface_probability == std::array<double, 3>{1.0, 0.8, 0.6});
  CHECK(p.crop_noise_radius == 3.0);
  CHECK(p.augment.rotation_max == kPi / 2);
  CHECK(c.refine_config().nms_threshold == 0.01);
  const auto e = c.eval_config();
  CHECK(e.iou_threshold == 0.7);
  CHECK(e.metric == IouMetric::Iou3d);
  CHECK(e.interpolation == Interpolation::R11);
  CHECK(c.n_total == 512);
}

TEST_CASE("parsing") {
  const auto c = parse_run_config(
      "# comment\n"
      "seed = 17\n"
      "\n"
      "metric=bev   # trailing comment\n"
      "  prob_hard = 0.25\n"
      "preset = rpn\n");
  CHECK(c.seed == 17);
  CHECK(c.metric == "bev");
  CHECK(c.prob_hard == 0.25);
  CHECK(c.preset == "rpn");
  CHECK(c.eval_config().metric == IouMetric::IouBev);

  // layered on a base
  RunConfig base;
  base.workers = 4;
  CHECK(parse_run_config("seed = 1\n", base).workers == 4);

  const auto keys = run_config_keys();
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  CHECK(std::find(keys.begin(), keys.end(), "crop_noise_radius") != keys.end());
}

TEST_CASE("errors name the line and key") {
  CHECK(error_of("seed = 1\nbogus = 3\n").find("line 2") != std::string::npos);
  CHECK(error_of("bogus = 3\n").find("bogus") != std::string::npos);
  CHECK_THROWS_AS(parse_run_config("bogus = 3\n"), FormatError);
  CHECK_THROWS_AS(parse_run_config("seed\n"), FormatError);
  CHECK_THROWS_AS(parse_run_config("seed = 1 2\n"), FormatError);
  CHECK_THROWS_AS(parse_run_config("seed = -1\n"), DataError);
  CHECK_THROWS_AS(parse_run_config("box_margin = wide\n"), DataError);
  CHECK(error_of("\n\nbox_margin = wide\n").find("line 3") != std::string::npos);
}

TEST_CASE("validation") {
  const auto bad = [](const std::string& line) { CHECK_THROWS_AS(parse_run_config(line), DataError); };
  bad("metric = iou\n");
  bad("interpolation = r20\n");
  bad("preset = vfe\n");
  bad("workers = 0\n");
  bad("prob_easy = 1.5\n");
  bad("nms_threshold = -0.1\n");
  bad("iou_threshold = 0\n");
  bad("global_scale_min = 1.1\n");
  bad("rotation_min = -2\n");
  bad("rotation_max = 1.6\n");
  bad("rotation_min = 0.5\nrotation_max = 0.2\n");
  bad("n_total = 3\n");
  bad("surface_window = 0\n");
  bad("crop_noise_radius = -1\n");
  CHECK_NOTHROW(parse_run_config("rotation_min = -0.3\nrotation_max = 0.3\n"));
}

TEST_CASE("format round trip and file loading") {
  RunConfig c;
  c.seed = 99;
  c.rotation_min = -0.123456789012345678;
  c.split = "val";
  c.interpolation = "r40";
  const std::string text = format_run_config(c);
  CHECK(text.find("seed = 99\n") != std::string::npos);
  const auto back = parse_run_config(text);
  CHECK(format_run_config(back) == text);
  CHECK(back.rotation_min == c.rotation_min);

  const auto dir = test::scratch_dir("run_config");
  {
    std::ofstream out(dir / "a.cfg");
    out << "seed = 5\nworkers = 2\n";
  }
  {
    std::ofstream out(dir / "bad.cfg");
    out << "seed = 5\nnope = 2\n";
  }
  const auto loaded = load_run_config(dir / "a.cfg");
  CHECK(loaded.seed == 5);
  CHECK(loaded.workers == 2);
  try {
    load_run_config(dir / "bad.cfg");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("bad.cfg") != std::string::npos);
  }
  CHECK_THROWS_AS(load_run_config(dir / "missing.cfg"), IoError);
}
