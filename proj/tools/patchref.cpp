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

// patchref command-line driver.
//
// Exit codes: 0 success, 1 internal error, 2 bad user input (flags, files,
// dataset content).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "patchref/anchors.hpp"
#include "patchref/box_codec.hpp"
#include "patchref/evaluator.hpp"
#include "patchref/inference.hpp"
#include "patchref/kitti_io.hpp"
#include "patchref/patch_db.hpp"
#include "patchref/patch_pipeline.hpp"
#include "patchref/run_config.hpp"
#include "patchref/synthetic.hpp"
#include "patchref/testing/selfcheck.hpp"
#include "patchref/voxelizer.hpp"

namespace fs = std::filesystem;
using namespace patchref;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

// Raised for bad invocations detected after flag parsing.
struct UsageError : Error {
  using Error::Error;
};

struct CommonFlags {
  std::string data_root;
  std::string split;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string metric;
  std::string interp;
  std::string proposals;
  std::string out;
  std::string predictions;
  std::string frame;
  std::string preset;
};

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig c;
  if (!f.config.empty()) c = load_run_config(f.config);
  if (!f.data_root.empty()) c.data_root = f.data_root;
  if (!f.split.empty()) c.split = f.split;
  if (f.seed) c.seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (!f.metric.empty()) c.metric = f.metric;
  if (!f.interp.empty()) c.interpolation = f.interp;
  if (!f.preset.empty()) c.preset = f.preset;
  c.validate();
  return c;
}

void print_config(const RunConfig& c) {
  std::cout << "# resolved config\n";
  std::istringstream lines(format_run_config(c));
  for (std::string line; std::getline(lines, line);) std::cout << "#   " << line << '\n';
  std::cout << fmt::format("# seed {}\n", c.seed);
}

KittiDataset require_dataset(const RunConfig& c) {
  if (c.data_root.empty()) throw UsageError("--data-root is required");
  if (!fs::is_directory(c.data_root)) throw IoError("data root " + c.data_root + " is not a directory");
  return KittiDataset(c.data_root);
}

// A split is a file path, or a name resolved under <root>/ImageSets.
std::vector<std::string> require_split(const RunConfig& c) {
  if (c.split.empty()) throw UsageError("--split is required");
  fs::path p = c.split;
  if (!fs::exists(p)) {
    const fs::path named = fs::path(c.data_root) / "ImageSets" / (c.split + ".txt");
    if (fs::exists(named)) p = named;
  }
  return load_split(p);
}

fs::path require_out(const CommonFlags& f) {
  if (f.out.empty()) throw UsageError("--out is required");
  return f.out;
}

std::vector<Box3d> sensor_boxes(const Frame& frame, std::string_view class_name) {
  std::vector<Box3d> boxes;
  for (const auto& l : frame.labels) {
    if (l.class_name == class_name) boxes.push_back(camera_box_to_sensor_frame(l, frame.calib));
  }
  return boxes;
}

int cmd_inspect(const CommonFlags& f) {
  const RunConfig c = resolve_config(f);
  const KittiDataset ds = require_dataset(c);
  if (f.frame.empty()) throw UsageError("--frame is required");
  if (!ds.has_frame(f.frame)) throw IoError(fmt::format("frame {} not found under {}", f.frame, c.data_root));
  const Frame frame = ds.load_frame(f.frame);

  std::cout << fmt::format("frame {}\npoints {}\n", frame.id, frame.cloud.size());
  std::map<std::string, std::array<int, 4>> counts;
  for (const auto& l : frame.labels) {
    if (l.is_dont_care()) {
      ++counts[l.class_name][3];
      continue;
    }
    ++counts[l.class_name][static_cast<std::size_t>(classify_difficulty(l))];
  }
  std::cout << "objects (easy moderate hard ignored)\n";
  for (const auto& [cls, n] : counts) {
    std::cout << fmt::format("  {:<14} {} {} {} {}\n", cls, n[0], n[1], n[2], n[3]);
  }
  std::cout << "boxes (sensor frame: x y z l w h yaw)\n";
  for (const auto& l : frame.labels) {
    if (l.is_dont_care()) continue;
    const Box3d b = camera_box_to_sensor_frame(l, frame.calib);
    std::cout << fmt::format("  {:<10} {:<8} {:.3f} {:.3f} {:.3f} {:.3f} {:.3f} {:.3f} {:.4f}\n", l.class_name,
                             to_string(classify_difficulty(l)), b.center.x(), b.center.y(), b.center.z(),
                             b.length, b.width, b.height, b.yaw);
  }
  return kExitOk;
}

std::vector<Scene> load_scenes(const KittiDataset& ds, const std::vector<std::string>& ids) {
  std::vector<Scene> scenes;
  scenes.reserve(ids.size());
  for (const auto& id : ids) scenes.push_back(make_scene(ds.load_frame(id)));
  return scenes;
}

int cmd_build_patch_db(const CommonFlags& f) {
  const RunConfig c = resolve_config(f);
  print_config(c);
  const KittiDataset ds = require_dataset(c);
  const auto ids = require_split(c);
  const fs::path out = require_out(f);

  const auto scenes = load_scenes(ds, ids);
  const PatchConfig pc = c.patch_config();
  const auto lists = build_object_surface_lists(scenes, pc);
  const auto patches = build_training_patches(lists, pc, derive_seed(c.seed, "patch_db"), c.workers);
  write_patch_db(out, patches);

  std::array<std::size_t, 4> hist{};
  std::size_t resampled = 0;
  for (const auto& p : patches) {
    ++hist[static_cast<std::size_t>(p.difficulty)];
    resampled += p.surface_resampled ? 1 : 0;
  }
  std::cout << fmt::format("frames {}\npatches {}\n", ids.size(), patches.size());
  std::cout << fmt::format("difficulty easy {} moderate {} hard {}\n", hist[0], hist[1], hist[2]);
  std::cout << fmt::format("surfaces resampled {}\n", resampled);
  std::cout << fmt::format("wrote {}\n", (out / kPatchDbFile).string());
  return kExitOk;
}

int cmd_extract(const CommonFlags& f) {
  const RunConfig c = resolve_config(f);
  print_config(c);
  const KittiDataset ds = require_dataset(c);
  const auto ids = require_split(c);
  const fs::path out = require_out(f);
  if (f.proposals.empty()) throw UsageError("--proposals is required");
  const auto proposals = load_proposals(f.proposals);
  const RefineConfig rc = c.refine_config();

  std::vector<ExtractedPatch> patches;
  std::size_t skipped = 0;
  for (const auto& id : ids) {
    const auto it = proposals.find(id);
    if (it == proposals.end()) continue;
    const Frame frame = ds.load_frame(id);
    const auto& props = it->second;
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (!proposal_in_scene(props[i])) {
        std::cerr << fmt::format("warning: frame {} proposal {} at ({:.2f}, {:.2f}) outside the scene, skipped\n",
                                 id, i, props[i].center.x(), props[i].center.y());
        ++skipped;
        continue;
      }
      std::vector<ScoredBox> others;
      for (std::size_t j = 0; j < props.size(); ++j) {
        if (j != i && props[j].box) others.push_back({*props[j].box, props[j].score});
      }
      ExtractedPatch e;
      e.frame_id = id;
      e.proposal_index = static_cast<std::uint32_t>(i);
      e.score = props[i].score;
      e.patch = extract_inference_patch(frame.cloud.points, props[i].center, others, rc.extraction);
      patches.push_back(std::move(e));
    }
  }
  write_extracted(out, patches);
  std::cout << fmt::format("patches {}\nskipped {}\n", patches.size(), skipped);
  std::cout << fmt::format("wrote {} and {}\n", (out / kPatchDbFile).string(), (out / kRotationLogFile).string());
  return kExitOk;
}

int cmd_refine(const CommonFlags& f) {
  const RunConfig c = resolve_config(f);
  print_config(c);
  const KittiDataset ds = require_dataset(c);
  const auto ids = require_split(c);
  const fs::path out = require_out(f);
  const RefineConfig rc = c.refine_config();
  ProposalsByFrame proposals;
  if (!f.proposals.empty()) proposals = load_proposals(f.proposals);

  std::size_t total = 0;
  for (const auto& id : ids) {
    const Frame frame = ds.load_frame(id);
    const auto gts = sensor_boxes(frame, c.class_name);
    std::vector<Proposal> props;
    if (f.proposals.empty()) {
      props = proposals_from_ground_truth(id, gts);
    } else if (auto it = proposals.find(id); it != proposals.end()) {
      for (const auto& p : it->second) {
        if (proposal_in_scene(p)) props.push_back(p);
      }
    }
    const auto dets = detect(frame.cloud, props, make_ground_truth_scorer(gts), rc);
    write_predictions(out, id, dets, frame.calib, c.class_name);
    total += dets.size();
  }
  std::cout << fmt::format("frames {}\ndetections {}\n", ids.size(), total);
  return kExitOk;
}

int cmd_eval(const CommonFlags& f, bool metric_given) {
  const RunConfig c = resolve_config(f);
  print_config(c);
  const KittiDataset ds = require_dataset(c);
  const auto ids = require_split(c);
  if (f.predictions.empty()) throw UsageError("--predictions is required");
  if (!fs::is_directory(f.predictions)) throw IoError("predictions directory " + f.predictions + " not found");

  std::vector<FrameGroundTruth> gts;
  std::vector<FrameDetections> dets;
  for (const auto& id : ids) {
    const Frame frame = ds.load_frame(id);
    gts.push_back(ground_truth_from_frame(frame));
    dets.push_back({id, read_predictions(f.predictions, id, frame.calib, c.class_name)});
  }
  EvalConfig ec = c.eval_config();
  std::vector<IouMetric> metrics;
  if (metric_given) {
    metrics.push_back(ec.metric);
  } else {
    metrics = {IouMetric::Iou3d, IouMetric::IouBev};
  }
  std::vector<EvalResult> results;
  for (IouMetric m : metrics) {
    ec.metric = m;
    results.push_back(evaluate(dets, gts, ec));
    std::cout << format_report(results.back()) << '\n';
  }
  if (!f.out.empty()) {
    write_text_file(f.out, format_result_file(results));
    std::cout << fmt::format("wrote {}\n", f.out);
  }
  return kExitOk;
}

int cmd_selfcheck(std::uint64_t seed, const std::string& fault) {
  testing::SelfcheckOptions opt;
  opt.seed = seed;
  if (!fault.empty()) {
    if (fault != "codec") throw UsageError("--inject-fault supports only 'codec'");
    opt.inject_codec_fault = true;
  }
  std::cout << fmt::format("# seed {}\n", seed);
  bool ok = true;
  for (const auto& r : testing::run_selfcheck(opt)) {
    std::cout << fmt::format("{} {:<12} {:7.2f}s {}\n", r.passed ? "PASS" : "FAIL", r.name, r.seconds, r.detail);
    ok = ok && r.passed;
  }
  std::cout << (ok ? "selfcheck passed\n" : "selfcheck FAILED\n");
  return ok ? kExitOk : kExitInternal;
}

int cmd_synth(const CommonFlags& f, std::size_t frames) {
  const fs::path out = require_out(f);
  SyntheticConfig sc;
  sc.num_frames = frames;
  if (f.seed) sc.seed = *f.seed;
  std::cout << fmt::format("# seed {}\n", sc.seed);
  const auto ids = write_synthetic_dataset(out, sc);
  std::cout << fmt::format("frames {}\nwrote {}\n", ids.size(), out.string());
  return kExitOk;
}

int cmd_voxelize(const CommonFlags& f, const std::string& input) {
  const RunConfig c = resolve_config(f);
  const fs::path out = require_out(f);
  PointCloud cloud;
  if (!input.empty()) {
    cloud = read_point_cloud(input);
  } else {
    const KittiDataset ds = require_dataset(c);
    if (f.frame.empty()) throw UsageError("--frame or --input is required");
    cloud = ds.load_frame(f.frame).cloud;
  }
  const auto grid = *preset_by_name(c.preset);
  const auto voxels = group_points(cloud, grid);
  if (voxels.empty()) throw DataError("no point falls inside the grid");
  const auto sample = encode_sample(voxels, cloud);
  write_sample(out, sample);
  std::cout << fmt::format("preset {} dims {}x{}x{}\nvoxels {}\npoints {}\nwrote {}\n", c.preset, sample.dims[0],
                           sample.dims[1], sample.dims[2], sample.num_voxels(), sample.features.rows(),
                           out.string());
  return kExitOk;
}

std::vector<Box3d> read_box_table(const fs::path& path) {
  std::vector<Box3d> boxes;
  std::istringstream in(read_text_file(path));
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream fields(line);
    double v[7];
    for (double& x : v) {
      if (!(fields >> x)) throw FormatError(fmt::format("{} line {}: expected x y z l w h yaw", path.string(), n));
    }
    std::string extra;
    if (fields >> extra) throw FormatError(fmt::format("{} line {}: expected 7 fields", path.string(), n));
    const Box3d b = make_box(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
    if (!is_valid(b)) throw DataError(fmt::format("{} line {}: invalid box", path.string(), n));
    boxes.push_back(b);
  }
  return boxes;
}

int cmd_targets(const CommonFlags& f, const std::string& gt_path, const std::string& anchor_path) {
  const fs::path out = require_out(f);
  if (gt_path.empty()) throw UsageError("--gt is required");
  const auto gts = read_box_table(gt_path);
  const auto anchors = anchor_path.empty() ? generate_anchors(lrn_anchor_spec()) : read_box_table(anchor_path);
  const auto match = match_anchors(anchors, gts);
  std::string text = "# anchor label reg gt direction r0..r8 c0..c7\n";
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    text += fmt::format("{} {} {} {}", a, static_cast<int>(match.detection[a]), match.positive_regression[a],
                        match.matched_gt[a]);
    ResidualTargets<double> t;
    CornerVector<double> corners = CornerVector<double>::Zero();
    if (match.matched_gt[a] >= 0) {
      const auto& g = gts[static_cast<std::size_t>(match.matched_gt[a])];
      t = encode_residual(g, anchors[a]);
      corners = encode_corners(g, anchors[a]);
    } else {
      t.direction = false;
    }
    text += fmt::format(" {}", t.direction ? 1 : 0);
    for (int i = 0; i < kNumResiduals; ++i) text += fmt::format(" {:.17g}", t.values[i]);
    for (int i = 0; i < kNumCornerTargets; ++i) text += fmt::format(" {:.17g}", corners[i]);
    text += '\n';
  }
  write_text_file(out, text);
  std::cout << fmt::format("anchors {}\ngts {}\nwrote {}\n", anchors.size(), gts.size(), out.string());
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool dataset) {
  if (dataset) {
    cmd->add_option("--data-root", f.data_root, "KITTI-layout dataset root");
    cmd->add_option("--split", f.split, "split file, or a name under <root>/ImageSets");
  }
  cmd->add_option("--config", f.config, "key = value run configuration");
  cmd->add_option("--seed", f.seed, "global seed");
  cmd->add_option("--workers", f.workers, "worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{fmt::format("patchref {} - local patch refinement toolkit", kVersion)};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonFlags f;
  std::string fault;
  std::string input;
  std::string gt_path;
  std::string anchor_path;
  std::size_t frames = 20;

  auto* inspect = app.add_subcommand("inspect", "summarize one frame");
  add_common(inspect, f, true);
  inspect->add_option("--frame", f.frame, "frame id")->required();

  auto* build = app.add_subcommand("build-patch-db", "construct the training patch database");
  add_common(build, f, true);
  build->add_option("--out", f.out, "output directory");

  auto* extract = app.add_subcommand("extract", "cut inference patches around proposals");
  add_common(extract, f, true);
  extract->add_option("--proposals", f.proposals, "proposal file");
  extract->add_option("--out", f.out, "output directory");

  auto* refine_cmd = app.add_subcommand("refine", "run refinement with the ground-truth oracle scorer");
  add_common(refine_cmd, f, true);
  refine_cmd->add_option("--proposals", f.proposals, "proposal file (default: ground truth)");
  refine_cmd->add_option("--out", f.out, "prediction directory");

  auto* eval = app.add_subcommand("eval", "average precision of KITTI-format predictions");
  add_common(eval, f, true);
  eval->add_option("--predictions", f.predictions, "prediction directory");
  auto* metric = eval->add_option("--metric", f.metric, "3d or bev (default: both)")
                     ->check(CLI::IsMember({"3d", "bev"}));
  eval->add_option("--interp", f.interp, "r11 or r40")->check(CLI::IsMember({"r11", "r40"}));
  eval->add_option("--out", f.out, "key = value result file");

  auto* selfcheck = app.add_subcommand("selfcheck", "run the embedded oracle suites");
  std::uint64_t check_seed = 0;
  selfcheck->add_option("--seed", check_seed, "seed for the random cases");
  selfcheck->add_option("--inject-fault", fault, "test mode: 'codec' perturbs decoding");

  auto* synth = app.add_subcommand("synth", "write a synthetic KITTI-layout dataset");
  synth->add_option("--out", f.out, "dataset root")->required();
  synth->add_option("--frames", frames, "number of frames");
  synth->add_option("--seed", f.seed, "generator seed");

  auto* voxelize = app.add_subcommand("voxelize", "dump the encoded voxel sample of a cloud");
  add_common(voxelize, f, true);
  voxelize->add_option("--frame", f.frame, "frame id under --data-root");
  voxelize->add_option("--input", input, "raw .bin point cloud");
  voxelize->add_option("--preset", f.preset, "grid preset: lrn or rpn");
  voxelize->add_option("--out", f.out, "output .prvx file");

  auto* targets = app.add_subcommand("targets", "dump matching labels and regression targets");
  targets->add_option("--gt", gt_path, "gt boxes, 'x y z l w h yaw' per line");
  targets->add_option("--anchors", anchor_path, "anchor boxes (default: LRN grid at the origin)");
  targets->add_option("--out", f.out, "output text file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (*inspect) return cmd_inspect(f);
    if (*build) return cmd_build_patch_db(f);
    if (*extract) return cmd_extract(f);
    if (*refine_cmd) return cmd_refine(f);
    if (*eval) return cmd_eval(f, metric->count() > 0);
    if (*selfcheck) return cmd_selfcheck(check_seed, fault);
    if (*synth) return cmd_synth(f, frames);
    if (*voxelize) return cmd_voxelize(f, input);
    if (*targets) return cmd_targets(f, gt_path, anchor_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
