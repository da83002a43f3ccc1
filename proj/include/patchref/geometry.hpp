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

// Oriented box math in the sensor frame: x forward, y left, z up. Yaw 0
// puts the box length along +x, counter-clockwise positive seen from above.
//
// All routines are templated on the scalar type and header-only; Box3d is
// the double instantiation used throughout the pipeline.

#ifndef PATCHREF_GEOMETRY_HPP
#define PATCHREF_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "patchref/common.hpp"
#include "patchref/point_cloud.hpp"

namespace patchref {

template <typename Scalar>
struct OrientedBox {
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

  Vec3 center = Vec3::Zero();  // centroid, not bottom center
  Scalar length{1};            // along the heading
  Scalar width{1};
  Scalar height{1};
  Scalar yaw{0};  // (-pi, pi]

  Scalar bottom() const { return center.z() - height / 2; }
  Scalar top() const { return center.z() + height / 2; }
  Scalar volume() const { return length * width * height; }
  Vec2 bev_center() const { return center.template head<2>(); }
};

using Box3d = OrientedBox<double>;

template <typename Scalar>
OrientedBox<Scalar> make_box(Scalar x, Scalar y, Scalar z, Scalar length, Scalar width,
                             Scalar height, Scalar yaw) {
  OrientedBox<Scalar> box;
  box.center << x, y, z;
  box.length = length;
  box.width = width;
  box.height = height;
  box.yaw = wrap_angle(yaw);
  return box;
}

template <typename Scalar>
bool is_valid(const OrientedBox<Scalar>& box) {
  return box.center.allFinite() && std::isfinite(box.yaw) && box.length > 0 && box.width > 0 &&
         box.height > 0;
}

/// Column i is corner i. Order: front-left, rear-left, rear-right,
/// front-right in the box's local frame, which is counter-clockwise.
template <typename Scalar>
using BevCorners = Eigen::Matrix<Scalar, 2, 4>;

/// Vertices as columns, counter-clockwise.
template <typename Scalar>
using BevPolygon = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> rotation_2d(Scalar angle) {
  const Scalar c = std::cos(angle);
  const Scalar s = std::sin(angle);
  Eigen::Matrix<Scalar, 2, 2> r;
  r << c, -s, s, c;
  return r;
}

template <typename Scalar>
BevCorners<Scalar> bev_corners(const OrientedBox<Scalar>& box) {
  const Scalar hl = box.length / 2;
  const Scalar hw = box.width / 2;
  BevCorners<Scalar> local;
  local << hl, -hl, -hl, hl,  //
      hw, hw, -hw, -hw;
  return (rotation_2d(box.yaw) * local).colwise() + box.bev_center();
}

/// Shoelace area; positive for counter-clockwise vertex order.
template <typename Derived>
typename Derived::Scalar polygon_area(const Eigen::MatrixBase<Derived>& poly) {
  using Scalar = typename Derived::Scalar;
  const Index n = poly.cols();
  Scalar twice = 0;
  for (Index i = 0; i < n; ++i) {
    const Index j = (i + 1) % n;
    twice += poly(0, i) * poly(1, j) - poly(0, j) * poly(1, i);
  }
  return twice / 2;
}

namespace detail {

template <typename Scalar>
Scalar cross(const Eigen::Matrix<Scalar, 2, 1>& a, const Eigen::Matrix<Scalar, 2, 1>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace detail

/// Sutherland-Hodgman clip of a convex polygon by a convex CCW polygon.
template <typename Scalar>
BevPolygon<Scalar> clip_convex(const BevPolygon<Scalar>& subject, const BevPolygon<Scalar>& clip) {
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  std::vector<Vec2> output;
  output.reserve(static_cast<std::size_t>(subject.cols() + clip.cols()));
  for (Index i = 0; i < subject.cols(); ++i) output.emplace_back(subject.col(i));

  std::vector<Vec2> input;
  for (Index e = 0; e < clip.cols() && !output.empty(); ++e) {
    const Vec2 a = clip.col(e);
    const Vec2 b = clip.col((e + 1) % clip.cols());
    const Vec2 edge = b - a;
    input.swap(output);
    output.clear();
    const auto side = [&](const Vec2& p) { return detail::cross<Scalar>(edge, p - a); };
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const Scalar s_cur = side(cur);
      const Scalar s_prev = side(prev);
      if (s_cur >= 0) {
        if (s_prev < 0) output.push_back(prev + (cur - prev) * (s_prev / (s_prev - s_cur)));
        output.push_back(cur);
      } else if (s_prev >= 0) {
        output.push_back(prev + (cur - prev) * (s_prev / (s_prev - s_cur)));
      }
    }
  }
  BevPolygon<Scalar> result(2, static_cast<Index>(output.size()));
  for (std::size_t i = 0; i < output.size(); ++i) result.col(static_cast<Index>(i)) = output[i];
  return result;
}

// Intersections below this area are treated as empty; clipping leaves
// sign noise around zero for touching boxes.
inline constexpr double kDegenerateArea = 1e-12;

template <typename Scalar>
Scalar bev_intersection_area(const OrientedBox<Scalar>& a, const OrientedBox<Scalar>& b) {
  const BevPolygon<Scalar> inter = clip_convex<Scalar>(bev_corners(a), bev_corners(b));
  if (inter.cols() < 3) return 0;
  const Scalar area = polygon_area(inter);
  return area < Scalar(kDegenerateArea) ? Scalar(0) : area;
}

template <typename Scalar>
Scalar rotated_bev_iou(const OrientedBox<Scalar>& a, const OrientedBox<Scalar>& b) {
  const Scalar inter = bev_intersection_area(a, b);
  if (inter <= 0) return 0;
  const Scalar uni = a.length * a.width + b.length * b.width - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar vertical_overlap(const OrientedBox<Scalar>& a, const OrientedBox<Scalar>& b) {
  return std::max(Scalar(0), std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom()));
}

template <typename Scalar>
Scalar iou_3d(const OrientedBox<Scalar>& a, const OrientedBox<Scalar>& b) {
  const Scalar dz = vertical_overlap(a, b);
  if (dz <= 0) return 0;
  const Scalar inter = bev_intersection_area(a, b) * dz;
  if (inter <= 0) return 0;
  return std::clamp(inter / (a.volume() + b.volume() - inter), Scalar(0), Scalar(1));
}

/// Multiple of pi/2 closest to `yaw`, wrapped to (-pi, pi]. Exact ties
/// go to the smaller multiple among {-pi/2, 0, pi/2, pi}.
template <typename Scalar>
Scalar nearest_axis_rotation(Scalar yaw) {
  constexpr Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  int best_k = -1;
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (int k = -1; k <= 2; ++k) {
    const Scalar d = std::abs(wrap_angle(yaw - k * half_pi));
    if (d < best) {
      best = d;
      best_k = k;
    }
  }
  return wrap_angle(best_k * half_pi);
}

/// BEV IoU of two axis-aligned rectangles given as (xmin, ymin, xmax, ymax).
template <typename Scalar>
Scalar aligned_rect_iou(const Eigen::Matrix<Scalar, 4, 1>& a, const Eigen::Matrix<Scalar, 4, 1>& b) {
  const Scalar ix = std::min(a[2], b[2]) - std::max(a[0], b[0]);
  const Scalar iy = std::min(a[3], b[3]) - std::max(a[1], b[1]);
  if (ix <= 0 || iy <= 0) return 0;
  const Scalar inter = ix * iy;
  const Scalar area_a = (a[2] - a[0]) * (a[3] - a[1]);
  const Scalar area_b = (b[2] - b[0]) * (b[3] - b[1]);
  return inter / (area_a + area_b - inter);
}

/// Axis-aligned BEV extent of a box after snapping its yaw to the nearest
/// axis about its own center.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> axis_aligned_extent(const OrientedBox<Scalar>& box) {
  const Scalar snapped = nearest_axis_rotation(box.yaw);
  const bool quarter = std::abs(std::abs(snapped) - std::numbers::pi_v<Scalar> / 2) < Scalar(1e-6);
  const Scalar hx = (quarter ? box.width : box.length) / 2;
  const Scalar hy = (quarter ? box.length : box.width) / 2;
  Eigen::Matrix<Scalar, 4, 1> r;
  r << box.center.x() - hx, box.center.y() - hy, box.center.x() + hx, box.center.y() + hy;
  return r;
}

/// Matching similarity: gt snapped to its nearest axis, then plain
/// rectangle IoU against the anchor (whose yaw is 0 or pi/2).
template <typename Scalar>
Scalar axis_aligned_bev_iou(const OrientedBox<Scalar>& gt, const OrientedBox<Scalar>& anchor) {
  return aligned_rect_iou<Scalar>(axis_aligned_extent(gt), axis_aligned_extent(anchor));
}

/// Rigid rotation about the vertical axis through `pivot`. Yaw advances by
/// `angle`; z is untouched.
template <typename Scalar>
OrientedBox<Scalar> rotate_about_z(const OrientedBox<Scalar>& box, Scalar angle,
                                   const Eigen::Matrix<Scalar, 2, 1>& pivot = {0, 0}) {
  OrientedBox<Scalar> out = box;
  out.center.template head<2>() = rotation_2d(angle) * (box.bev_center() - pivot) + pivot;
  out.yaw = wrap_angle(box.yaw + angle);
  return out;
}

template <typename Scalar>
PointMatrixT<Scalar> rotate_about_z(const PointMatrixT<Scalar>& points, Scalar angle,
                                    const Eigen::Matrix<Scalar, 2, 1>& pivot = {0, 0}) {
  PointMatrixT<Scalar> out = points;
  const Eigen::Matrix<Scalar, 2, 2> r = rotation_2d(angle);
  out.template leftCols<2>() =
      ((points.template leftCols<2>().rowwise() - pivot.transpose()) * r.transpose()).rowwise() +
      pivot.transpose();
  return out;
}

inline PointCloud rotate_about_z(const PointCloud& cloud, double angle,
                                 const Eigen::Vector2d& pivot = {0, 0}) {
  return PointCloud{rotate_about_z<double>(cloud.points, angle, pivot), cloud.frame_id};
}

/// Point expressed in the box's local frame (origin at the centroid).
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> to_box_frame(const OrientedBox<Scalar>& box,
                                         const Eigen::Matrix<Scalar, 3, 1>& p) {
  const Eigen::Matrix<Scalar, 3, 1> d = p - box.center;
  const Scalar c = std::cos(box.yaw);
  const Scalar s = std::sin(box.yaw);
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
}

/// Inclusive containment in the box grown by `margin` on every face.
template <typename Scalar>
bool box_contains(const OrientedBox<Scalar>& box, const Eigen::Matrix<Scalar, 3, 1>& p,
                  Scalar margin = 0) {
  const auto local = to_box_frame(box, p);
  return std::abs(local.x()) <= box.length / 2 + margin &&
         std::abs(local.y()) <= box.width / 2 + margin &&
         std::abs(local.z()) <= box.height / 2 + margin;
}

template <typename Scalar>
std::vector<Index> points_in_box(const PointMatrixT<Scalar>& points, const OrientedBox<Scalar>& box,
                                 Scalar margin = 0) {
  std::vector<Index> inside;
  for (Index i = 0; i < points.rows(); ++i) {
    const Eigen::Matrix<Scalar, 3, 1> p = points.row(i).template head<3>().transpose();
    if (box_contains(box, p, margin)) inside.push_back(i);
  }
  return inside;
}

inline std::vector<Index> points_in_box(const PointCloud& cloud, const Box3d& box,
                                        double margin = 0) {
  return points_in_box<double>(cloud.points, box, margin);
}

/// Box with each of l, w, h grown by 2 * margin.
template <typename Scalar>
OrientedBox<Scalar> enlarged(const OrientedBox<Scalar>& box, Scalar margin) {
  OrientedBox<Scalar> out = box;
  out.length += 2 * margin;
  out.width += 2 * margin;
  out.height += 2 * margin;
  return out;
}

}  // namespace patchref

#endif  // PATCHREF_GEOMETRY_HPP
