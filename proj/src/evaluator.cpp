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

#include "patchref/evaluator.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

namespace patchref {

namespace {

bool is_neighbour_class(std::string_view evaluated, std::string_view other) {
  return (evaluated == "Car" && other == "Van") ||
         (evaluated == "Pedestrian" && other == "Person_sitting");
}

struct RankedDetection {
  double score;
  std::string_view frame_id;
  std::size_t index;
  bool tp;
};

}  // namespace

std::string_view to_string(IouMetric m) { return m == IouMetric::Iou3d ? "3d" : "bev"; }
std::string_view to_string(Interpolation i) { return i == Interpolation::R11 ? "r11" : "r40"; }

FrameGroundTruth ground_truth_from_frame(const Frame& frame) {
  FrameGroundTruth gt;
  gt.frame_id = frame.id;
  for (const auto& label : frame.labels) {
    if (label.is_dont_care()) continue;
    gt.objects.push_back(
        {camera_box_to_sensor_frame(label, frame.calib), label.class_name, classify_difficulty(label)});
  }
  return gt;
}

FrameMatch match_frame(std::span<const DetectionRecord> dets, std::span<const Box3d> gts,
                       std::span<const std::uint8_t> gt_ignored, const IouFunction& iou,
                       double threshold) {
  if (gt_ignored.size() != gts.size()) throw ContractError("ignore flags do not fit the gts");
  FrameMatch m;
  m.detections.assign(dets.size(), MatchOutcome::FalsePositive);
  m.gt_matched.assign(gts.size(), 0);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  for (std::size_t d : order) {
    int best = -1;
    double best_iou = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (m.gt_matched[g]) continue;
      const double v = iou(dets[d].box, gts[g]);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best < 0) continue;
    m.gt_matched[static_cast<std::size_t>(best)] = 1;
    m.detections[d] =
        gt_ignored[static_cast<std::size_t>(best)] ? MatchOutcome::IgnoredMatch : MatchOutcome::TruePositive;
  }
  return m;
}

std::vector<double> recall_sample_points(Interpolation interpolation) {
  std::vector<double> r;
  if (interpolation == Interpolation::R11) {
    for (int i = 0; i <= 10; ++i) r.push_back(i / 10.0);
  } else {
    for (int i = 1; i <= 40; ++i) r.push_back(i / 40.0);
  }
  return r;
}

namespace {

struct Curve {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> samples;
  std::vector<double> interpolated;
  double ap = 0;
};

Curve pr_curve(std::span<const std::uint8_t> ranked_tp, std::size_t num_gt, Interpolation interp) {
  Curve c;
  c.samples = recall_sample_points(interp);
  c.interpolated.assign(c.samples.size(), 0.0);
  if (num_gt == 0) return c;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
    tp += ranked_tp[i] ? 1 : 0;
    c.precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    c.recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  // Envelope: best precision at any recall >= r.
  std::vector<double> envelope = c.precision;
  for (std::size_t i = envelope.size(); i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  double sum = 0;
  for (std::size_t s = 0; s < c.samples.size(); ++s) {
    const auto it = std::lower_bound(c.recall.begin(), c.recall.end(), c.samples[s]);
    if (it == c.recall.end()) continue;
    c.interpolated[s] = envelope[static_cast<std::size_t>(it - c.recall.begin())];
    sum += c.interpolated[s];
  }
  c.ap = 100.0 * sum / static_cast<double>(c.samples.size());
  return c;
}

}  // namespace

double average_precision(std::span<const std::uint8_t> ranked_tp, std::size_t num_gt,
                         Interpolation interpolation) {
  return pr_curve(ranked_tp, num_gt, interpolation).ap;
}

EvalResult evaluate(std::span<const FrameDetections> detections,
                    std::span<const FrameGroundTruth> ground_truth, const EvalConfig& config) {
  if (!(config.iou_threshold > 0 && config.iou_threshold <= 1)) {
    throw ContractError(fmt::format("IoU threshold {} outside (0, 1]", config.iou_threshold));
  }
  std::map<std::string_view, const FrameDetections*> det_by_id;
  std::map<std::string_view, const FrameGroundTruth*> gt_by_id;
  for (const auto& f : detections) {
    if (!det_by_id.emplace(f.frame_id, &f).second) {
      throw ContractError("duplicate detection frame " + f.frame_id);
    }
  }
  for (const auto& f : ground_truth) {
    if (!gt_by_id.emplace(f.frame_id, &f).second) {
      throw ContractError("duplicate ground-truth frame " + f.frame_id);
    }
  }
  if (det_by_id.size() != gt_by_id.size() ||
      !std::equal(det_by_id.begin(), det_by_id.end(), gt_by_id.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    throw ContractError("detection and ground-truth frame sets differ");
  }

  const IouFunction iou = config.metric == IouMetric::Iou3d
                              ? IouFunction([](const Box3d& a, const Box3d& b) { return iou_3d(a, b); })
                              : IouFunction([](const Box3d& a, const Box3d& b) { return rotated_bev_iou(a, b); });

  EvalResult result;
  result.config = config;
  for (int level = 0; level < 3; ++level) {
    LevelResult& out = result.levels[static_cast<std::size_t>(level)];
    out.level = static_cast<Difficulty>(level);
    std::vector<RankedDetection> ranked;

    for (const auto& [id, gt_frame] : gt_by_id) {
      std::vector<Box3d> boxes;
      std::vector<std::uint8_t> ignored;
      for (const auto& obj : gt_frame->objects) {
        const bool same = obj.class_name == config.class_name;
        if (!same && !is_neighbour_class(config.class_name, obj.class_name)) continue;
        const bool target = same && obj.difficulty != Difficulty::Ignored &&
                            static_cast<int>(obj.difficulty) <= level;
        boxes.push_back(obj.box);
        ignored.push_back(target ? 0 : 1);
        out.num_gt += target ? 1 : 0;
      }
      const auto& dets = det_by_id.at(id)->detections;
      const FrameMatch m = match_frame(dets, boxes, ignored, iou, config.iou_threshold);
      for (std::size_t d = 0; d < dets.size(); ++d) {
        if (m.detections[d] == MatchOutcome::IgnoredMatch) continue;
        ranked.push_back({dets[d].score, id, d, m.detections[d] == MatchOutcome::TruePositive});
      }
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedDetection& a, const RankedDetection& b) {
      return std::tie(b.score, a.frame_id, a.index) < std::tie(a.score, b.frame_id, b.index);
    });
    std::vector<std::uint8_t> flags;
    for (const auto& r : ranked) {
      flags.push_back(r.tp ? 1 : 0);
      if (r.tp) {
        ++out.tp;
      } else {
        ++out.fp;
      }
    }
    out.has_targets = out.num_gt > 0;
    out.fn = out.num_gt - out.tp;
    Curve c = pr_curve(flags, out.num_gt, config.interpolation);
    out.ap = c.ap;
    out.precision = std::move(c.precision);
    out.recall = std::move(c.recall);
    out.recall_samples = std::move(c.samples);
    out.interpolated_precision = std::move(c.interpolated);
  }
  return result;
}

std::string format_report(const EvalResult& r) {
  std::string s = fmt::format("class {}  metric {}  IoU >= {:.2f}  interpolation {}\n",
                              r.config.class_name, to_string(r.config.metric), r.config.iou_threshold,
                              to_string(r.config.interpolation));
  s += fmt::format("{:<10} {:>8} {:>6} {:>6} {:>6} {:>6}\n", "level", "AP", "gt", "tp", "fp", "fn");
  for (const auto& l : r.levels) {
    const std::string ap = l.has_targets ? fmt::format("{:.2f}", l.ap) : "n/a";
    s += fmt::format("{:<10} {:>8} {:>6} {:>6} {:>6} {:>6}\n", to_string(l.level), ap, l.num_gt, l.tp,
                     l.fp, l.fn);
  }
  return s;
}

std::string format_result_file(std::span<const EvalResult> results) {
  if (results.empty()) return {};
  const auto& head = results.front().config;
  std::string s;
  s += fmt::format("class = {}\n", head.class_name);
  s += fmt::format("interpolation = {}\n", to_string(head.interpolation));
  s += fmt::format("iou_threshold = {}\n", head.iou_threshold);
  for (const auto& r : results) {
    const auto metric = to_string(r.config.metric);
    for (const auto& l : r.levels) {
      const auto name = fmt::format("{}_{}", metric, to_string(l.level));
      s += fmt::format("ap_{} = {}\n", name, l.has_targets ? fmt::format("{:.6f}", l.ap) : "nan");
      s += fmt::format("num_gt_{} = {}\n", name, l.num_gt);
      s += fmt::format("tp_{} = {}\n", name, l.tp);
      s += fmt::format("fp_{} = {}\n", name, l.fp);
      s += fmt::format("fn_{} = {}\n", name, l.fn);
    }
  }
  return s;
}

}  // namespace patchref
