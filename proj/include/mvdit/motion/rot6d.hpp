// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Continuous 6D rotation representation: the first two columns of the
// rotation matrix, orthonormalized back with Gram-Schmidt.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

#include "mvdit/motion/motion_types.hpp"

namespace mvdit::motion {

inline Eigen::Matrix3d rot6d_to_matrix(const std::array<double, 6>& r6, double tolerance = 1e-9) {
  const Eigen::Vector3d a1(r6[0], r6[1], r6[2]);
  const Eigen::Vector3d a2(r6[3], r6[4], r6[5]);
  if (a1.norm() < tolerance) throw MotionError("degenerate 6D rotation: zero first column");
  const Eigen::Vector3d b1 = a1.normalized();
  const Eigen::Vector3d u2 = a2 - b1.dot(a2) * b1;
  if (u2.norm() < tolerance * std::max(1.0, a2.norm())) throw MotionError("degenerate 6D rotation: collinear columns");
  const Eigen::Vector3d b2 = u2.normalized();
  Eigen::Matrix3d r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b1.cross(b2);
  return r;
}

inline Eigen::Matrix3d rot6d_to_matrix(const Rot6& r6) {
  return rot6d_to_matrix(std::array<double, 6>{r6[0], r6[1], r6[2], r6[3], r6[4], r6[5]});
}

inline std::array<double, 6> matrix_to_rot6d(const Eigen::Matrix3d& r) {
  return {r(0, 0), r(1, 0), r(2, 0), r(0, 1), r(1, 1), r(2, 1)};
}

inline Rot6 matrix_to_rot6f(const Eigen::Matrix3d& r) {
  auto d = matrix_to_rot6d(r);
  return {static_cast<float>(d[0]), static_cast<float>(d[1]), static_cast<float>(d[2]),
          static_cast<float>(d[3]), static_cast<float>(d[4]), static_cast<float>(d[5])};
}

}  // namespace mvdit::motion
