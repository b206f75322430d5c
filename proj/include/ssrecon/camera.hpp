#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ssrecon {

/// Rigid camera-to-world transform. The camera frame follows the
/// computer-vision convention: +x right, +y down, +z along the optical axis,
/// so the third rotation column is the viewing direction in world space.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Homogeneous [R t; 0 0 0 1].
  Eigen::Matrix4d matrix() const;
  static CameraPose from_matrix(const Eigen::Matrix4d& m);

  Eigen::Vector3d view_direction() const { return rotation.col(2); }
  Eigen::Vector3d position() const { return translation; }

  /// R^T R = I and det R = +1 within `tolerance`.
  bool is_rigid(double tolerance = 1e-5) const;

  CameraPose inverse() const;
  CameraPose operator*(const CameraPose& rhs) const;

  bool operator==(const CameraPose&) const = default;
};

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool operator==(const Intrinsics&) const = default;
};

/// Camera-to-world pose whose optical axis points from `eye` to `target`.
CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                   const Eigen::Vector3d& up = Eigen::Vector3d::UnitY());

}  // namespace ssrecon
