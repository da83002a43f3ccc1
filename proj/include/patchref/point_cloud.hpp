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

#ifndef PATCHREF_POINT_CLOUD_HPP
#define PATCHREF_POINT_CLOUD_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace patchref {

using Index = Eigen::Index;

/// Rows are (x, y, z, reflectance) in the sensor frame, meters.
template <typename Scalar>
using PointMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, 4, Eigen::RowMajor>;
using PointMatrix = PointMatrixT<double>;

// Points are held in double precision. Values read from KITTI float32
// files widen exactly, so writing them back is byte-identical.
struct PointCloud {
  PointMatrix points;
  std::string frame_id;

  Index size() const { return points.rows(); }
  bool empty() const { return points.rows() == 0; }
};

/// Rows of `points` selected by `indices`, in the given order.
inline PointMatrix gather_rows(const PointMatrix& points, std::span<const Index> indices) {
  PointMatrix out(static_cast<Index>(indices.size()), 4);
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = points.row(indices[static_cast<std::size_t>(i)]);
  return out;
}

/// All rows except those in `removed` (which need not be sorted).
inline PointMatrix erase_rows(const PointMatrix& points, std::span<const Index> removed) {
  std::vector<char> drop(static_cast<std::size_t>(points.rows()), 0);
  for (Index i : removed) drop[static_cast<std::size_t>(i)] = 1;
  std::vector<Index> keep;
  keep.reserve(drop.size());
  for (Index i = 0; i < points.rows(); ++i) {
    if (!drop[static_cast<std::size_t>(i)]) keep.push_back(i);
  }
  return gather_rows(points, keep);
}

inline PointMatrix concat_rows(const PointMatrix& top, const PointMatrix& bottom) {
  PointMatrix out(top.rows() + bottom.rows(), 4);
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace patchref

#endif  // PATCHREF_POINT_CLOUD_HPP
