#include <algorithm>
#include <cmath>

#include "ssrecon/error.hpp"
#include "ssrecon/keyframe.hpp"

namespace ssrecon {

Eigen::Matrix4d CameraPose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

CameraPose CameraPose::from_matrix(const Eigen::Matrix4d& m) {
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

bool CameraPose::is_rigid(double tolerance) const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(rotation.determinant() - 1.0) <= tolerance;
}

CameraPose CameraPose::inverse() const {
  const Eigen::Matrix3d rt = rotation.transpose();
  return {rt, -rt * translation};
}

CameraPose CameraPose::operator*(const CameraPose& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraPose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

namespace keyframe {

CameraPose pose_from_world_to_camera(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) {
  const double norm = q.norm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-3) {
    throw Error(ErrorKind::NonUnitQuaternion, "quaternion norm " + std::to_string(norm) + " is not 1");
  }
  const Eigen::Matrix3d world_to_camera = q.normalized().toRotationMatrix();
  CameraPose pose;
  pose.rotation = world_to_camera.transpose();
  pose.translation = -pose.rotation * t;
  return pose;
}

double angular_difference(const CameraPose& a, const CameraPose& b) {
  const double chord_sq = (a.view_direction() - b.view_direction()).squaredNorm();
  return std::acos(std::clamp(1.0 - 0.5 * chord_sq, -1.0, 1.0));
}

double displacement(const CameraPose& a, const CameraPose& b) {
  return (a.translation - b.translation).norm();
}

}  // namespace keyframe
}  // namespace ssrecon
