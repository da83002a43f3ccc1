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

// Residual box targets relative to an anchor, with a sin/|cos| heading
// encoding plus a direction bit, and BEV corner-offset auxiliary targets.
//
// Residual layout (index: meaning):
//   0 dx    (x_g - x_a) / diag_a        diag_a = sqrt(l_a^2 + w_a^2)
//   1 dy    (y_g - y_a) / diag_a
//   2 dz_b  bottom_g - bottom_a
//   3 dz_t  top_g - top_a
//   4 dw    log(w_g / w_a)
//   5 dh    log(h_g / h_a)
//   6 dl    log(l_g / l_a)
//   7 deta  sin(yaw_g - yaw_a)
//   8 dzeta |cos(yaw_g - yaw_a)|
// direction = cos(yaw_g - yaw_a) > 0.

#ifndef PATCHREF_BOX_CODEC_HPP
#define PATCHREF_BOX_CODEC_HPP

#include <cmath>

#include <Eigen/Core>

#include "patchref/common.hpp"
#include "patchref/geometry.hpp"

namespace patchref {

enum ResidualIndex : int {
  kDx = 0,
  kDy = 1,
  kDzBottom = 2,
  kDzTop = 3,
  kDw = 4,
  kDh = 5,
  kDl = 6,
  kDeta = 7,
  kDzeta = 8,
  kNumResiduals = 9,
};

inline constexpr int kNumCornerTargets = 8;

template <typename Scalar>
using ResidualVector = Eigen::Matrix<Scalar, kNumResiduals, 1>;

template <typename Scalar>
using CornerVector = Eigen::Matrix<Scalar, kNumCornerTargets, 1>;

template <typename Scalar>
struct ResidualTargets {
  ResidualVector<Scalar> values = ResidualVector<Scalar>::Zero();
  bool direction = true;
};

/// |cos| at or below this counts as exactly zero, so a heading difference
/// of pi/2 lands on direction = 0 despite rounding in cos(pi/2).
inline constexpr double kCosineZero = 1e-15;

template <typename Scalar>
Scalar anchor_diagonal(const OrientedBox<Scalar>& anchor) {
  return std::sqrt(anchor.length * anchor.length + anchor.width * anchor.width);
}

template <typename Scalar>
ResidualTargets<Scalar> encode_residual(const OrientedBox<Scalar>& gt,
                                        const OrientedBox<Scalar>& anchor) {
  if (!(anchor.length > 0 && anchor.width > 0 && anchor.height > 0)) {
    throw ContractError("anchor dimensions must be positive");
  }
  const Scalar diag = anchor_diagonal(anchor);
  const Scalar dyaw = gt.yaw - anchor.yaw;
  Scalar cos_d = std::cos(dyaw);
  if (std::abs(cos_d) <= Scalar(kCosineZero)) cos_d = 0;

  ResidualTargets<Scalar> t;
  auto& u = t.values;
  u[kDx] = (gt.center.x() - anchor.center.x()) / diag;
  u[kDy] = (gt.center.y() - anchor.center.y()) / diag;
  u[kDzBottom] = gt.center.z() - gt.height / 2 - anchor.center.z() + anchor.height / 2;
  u[kDzTop] = gt.center.z() + gt.height / 2 - anchor.center.z() - anchor.height / 2;
  u[kDw] = std::log(gt.width / anchor.width);
  u[kDh] = std::log(gt.height / anchor.height);
  u[kDl] = std::log(gt.length / anchor.length);
  u[kDeta] = std::sin(dyaw);
  u[kDzeta] = std::abs(cos_d);
  t.direction = cos_d > 0;
  return t;
}

/// Inverse of encode_residual. Height and vertical center come from the
/// decoded bottom and top faces; the dh channel is not consulted.
/// Throws NumericError when the decoded top is not above the bottom.
template <typename Scalar>
OrientedBox<Scalar> decode_residual(const ResidualTargets<Scalar>& targets,
                                    const OrientedBox<Scalar>& anchor) {
  const auto& u = targets.values;
  const Scalar diag = anchor_diagonal(anchor);
  const Scalar bottom = anchor.bottom() + u[kDzBottom];
  const Scalar top = anchor.top() + u[kDzTop];
  if (!(top > bottom)) throw NumericError("decoded box has non-positive height");

  OrientedBox<Scalar> box;
  box.center.x() = anchor.center.x() + u[kDx] * diag;
  box.center.y() = anchor.center.y() + u[kDy] * diag;
  box.center.z() = (bottom + top) / 2;
  box.height = top - bottom;
  box.width = anchor.width * std::exp(u[kDw]);
  box.length = anchor.length * std::exp(u[kDl]);
  const Scalar sign = targets.direction ? Scalar(1) : Scalar(-1);
  box.yaw = wrap_angle(anchor.yaw + std::atan2(u[kDeta], sign * u[kDzeta]));
  return box;
}

/// Per-corner BEV offsets (c_1..c_4, d_1..d_4) in bev_corners order.
template <typename Scalar>
CornerVector<Scalar> corner_vector(const OrientedBox<Scalar>& box) {
  const BevCorners<Scalar> c = bev_corners(box);
  CornerVector<Scalar> f;
  f << c.row(0).transpose(), c.row(1).transpose();
  return f;
}

template <typename Scalar>
CornerVector<Scalar> encode_corners(const OrientedBox<Scalar>& gt, const OrientedBox<Scalar>& anchor) {
  return corner_vector(gt) - corner_vector(anchor);
}

}  // namespace patchref

#endif  // PATCHREF_BOX_CODEC_HPP
