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

#include "patchref/loss.hpp"

#include <cmath>

#include <fmt/format.h>

namespace patchref {

namespace {

struct Clamped {
  double p;
  bool active;  // clamp changed the value
};

Clamped clamp_probability(double p) {
  const double lo = kProbabilityClamp;
  const double hi = 1.0 - kProbabilityClamp;
  if (p < lo) return {lo, true};
  if (p > hi) return {hi, true};
  return {p, false};
}

}  // namespace

ScalarLoss bce(double p, double t) {
  const auto [q, clamped] = clamp_probability(p);
  ScalarLoss out;
  out.value = -t * std::log(q) - (1.0 - t) * std::log1p(-q);
  out.gradient = clamped ? 0.0 : -t / q + (1.0 - t) / (1.0 - q);
  return out;
}

ScalarLoss focal(double p, double t, const FocalParams& fp) {
  const auto [q, clamped] = clamp_probability(p);
  const double a = fp.alpha;
  const double g = fp.gamma;
  ScalarLoss out;
  // Positive and negative branches, blended by the target.
  const double mod_pos = std::pow(1.0 - q, g);
  const double log_q = std::log(q);
  const double pos = -a * mod_pos * log_q;
  const double d_pos = a * (g * std::pow(1.0 - q, g - 1.0) * log_q - mod_pos / q);

  const double mod_neg = std::pow(q, g);
  const double log_1q = std::log1p(-q);
  const double neg = -(1.0 - a) * mod_neg * log_1q;
  const double d_neg = -(1.0 - a) * (g * std::pow(q, g - 1.0) * log_1q - mod_neg / (1.0 - q));

  out.value = t * pos + (1.0 - t) * neg;
  out.gradient = clamped ? 0.0 : t * d_pos + (1.0 - t) * d_neg;
  return out;
}

VectorLoss smooth_l1(const Eigen::Ref<const Eigen::VectorXd>& pred,
                     const Eigen::Ref<const Eigen::VectorXd>& target) {
  if (pred.size() != target.size()) {
    throw ContractError(
        fmt::format("smooth_l1 length mismatch: {} vs {}", pred.size(), target.size()));
  }
  VectorLoss out;
  out.gradient.resize(pred.size());
  std::vector<double> terms(static_cast<std::size_t>(pred.size()));
  for (Index i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    if (std::abs(d) < 1.0) {
      terms[static_cast<std::size_t>(i)] = 0.5 * d * d;
      out.gradient[i] = d;
    } else {
      terms[static_cast<std::size_t>(i)] = std::abs(d) - 0.5;
      out.gradient[i] = d > 0 ? 1.0 : -1.0;
    }
  }
  out.value = pairwise_sum(terms);
  return out;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

HeadTargets build_targets(std::span<const Box3d> anchors, std::span<const Box3d> gt_boxes,
                          const MatchResult& match) {
  const auto k = static_cast<Index>(anchors.size());
  if (match.size() != anchors.size()) throw ContractError("match result does not fit anchors");
  HeadTargets t;
  t.residuals = ResidualMatrix::Zero(k, kNumResiduals);
  t.corners = CornerMatrix::Zero(k, kNumCornerTargets);
  t.direction = Eigen::VectorXd::Zero(k);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (!match.positive_regression[a]) continue;
    const int g = match.matched_gt[a];
    if (g < 0 || static_cast<std::size_t>(g) >= gt_boxes.size()) {
      throw ContractError("regression-positive anchor without a matched gt");
    }
    const auto& gt = gt_boxes[static_cast<std::size_t>(g)];
    const auto res = encode_residual(gt, anchors[a]);
    t.residuals.row(static_cast<Index>(a)) = res.values.transpose();
    t.corners.row(static_cast<Index>(a)) = encode_corners(gt, anchors[a]).transpose();
    t.direction[static_cast<Index>(a)] = res.direction ? 1.0 : 0.0;
    t.regression.push_back(a);
  }
  return t;
}

LossBreakdown total_loss(const HeadActivations& act, const HeadTargets& tgt,
                         const SampledAnchors& sampled, const LossWeights& w) {
  const Index k = act.detection.size();
  if (act.residuals.rows() != k || act.corners.rows() != k || act.direction.size() != k ||
      tgt.residuals.rows() != k || tgt.corners.rows() != k || tgt.direction.size() != k) {
    throw ContractError(fmt::format("loss inputs disagree on the anchor count {}", k));
  }
  const auto check_index = [k](std::size_t a) {
    if (static_cast<Index>(a) >= k) throw ContractError("anchor index out of range");
  };

  LossBreakdown out;
  out.gradient.detection = Eigen::VectorXd::Zero(k);
  out.gradient.residuals = ResidualMatrix::Zero(k, kNumResiduals);
  out.gradient.corners = CornerMatrix::Zero(k, kNumCornerTargets);
  out.gradient.direction = Eigen::VectorXd::Zero(k);

  const auto classify = [&](double p, double t) {
    return w.detection_loss == ClassificationLoss::Focal ? focal(p, t, w.focal) : bce(p, t);
  };

  const double n_total = static_cast<double>(sampled.total());
  if (n_total > 0) {
    std::vector<double> terms;
    terms.reserve(sampled.positives.size());
    for (std::size_t a : sampled.positives) {
      check_index(a);
      const auto l = classify(act.detection[static_cast<Index>(a)], 1.0);
      terms.push_back(l.value);
      out.gradient.detection[static_cast<Index>(a)] += w.alpha * l.gradient / n_total;
    }
    out.pos_cls = pairwise_sum(terms) / n_total;
    terms.clear();
    for (std::size_t a : sampled.negatives) {
      check_index(a);
      const auto l = classify(act.detection[static_cast<Index>(a)], 0.0);
      terms.push_back(l.value);
      out.gradient.detection[static_cast<Index>(a)] += w.beta * l.gradient / n_total;
    }
    out.neg_cls = pairwise_sum(terms) / n_total;
  }

  const double n_reg = static_cast<double>(tgt.regression.size());
  out.regression_empty = tgt.regression.empty();
  if (!out.regression_empty) {
    std::vector<double> res_terms;
    std::vector<double> corner_terms;
    std::vector<double> dir_terms;
    const double scale = w.gamma / n_reg;
    for (std::size_t a : tgt.regression) {
      check_index(a);
      const auto r = static_cast<Index>(a);
      const auto lr = smooth_l1(act.residuals.row(r).transpose(), tgt.residuals.row(r).transpose());
      const auto lc = smooth_l1(act.corners.row(r).transpose(), tgt.corners.row(r).transpose());
      const auto ld = bce(act.direction[r], tgt.direction[r]);
      res_terms.push_back(lr.value);
      corner_terms.push_back(lc.value);
      dir_terms.push_back(ld.value);
      out.gradient.residuals.row(r) += scale * lr.gradient.transpose();
      out.gradient.corners.row(r) += scale * lc.gradient.transpose();
      out.gradient.direction[r] += scale * ld.gradient;
    }
    out.reg_residual = pairwise_sum(res_terms) / n_reg;
    out.reg_corner = pairwise_sum(corner_terms) / n_reg;
    out.direction = pairwise_sum(dir_terms) / n_reg;
  }

  out.total = w.alpha * out.pos_cls + w.beta * out.neg_cls +
              w.gamma * (out.reg_residual + out.reg_corner + out.direction);
  return out;
}

}  // namespace patchref
