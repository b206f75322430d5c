#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssrecon/camera.hpp"
#include "ssrecon/image.hpp"

namespace ssrecon::keyframe {

struct FrameRecord {
  int frame_id = 0;
  std::string image_path;
  std::optional<CameraPose> pose;
  double sharpness = 0.0;
  /// Importance score of the last selection pass (keyframe score, not to be
  /// confused with illumination).
  double importance = 0.0;
};

struct SelectionConfig {
  double w1 = 0.4;  // sharpness
  double w2 = 0.3;  // displacement; angular difference gets 1 - w1 - w2
  int window = 15;
  int keep_per_window = 2;

  void validate() const;
};

/// Converts a world-to-camera rotation (unit quaternion w, x, y, z) and
/// translation, as written by structure-from-motion tools, into a
/// camera-to-world pose. Quaternions off unit norm by more than 1e-3 are
/// rejected; smaller deviations are renormalized.
CameraPose pose_from_world_to_camera(const Eigen::Quaterniond& q, const Eigen::Vector3d& t);

/// Angle between the two viewing directions, arccos(1 - |v_a - v_b|^2 / 2).
double angular_difference(const CameraPose& a, const CameraPose& b);

/// |t_a - t_b|.
double displacement(const CameraPose& a, const CameraPose& b);

/// Variance of the 4-neighbour Laplacian of the luminance, taken over the
/// interior pixels where the full stencil lies inside the image.
double sharpness(const Plane& luma);
double sharpness(const ImageF& img);

struct TermRange {
  double min = 0.0;
  double max = 0.0;

  /// Min-max normalization; a degenerate range maps everything to 0.5.
  double normalize(double v) const;
  void include(double v);
  static TermRange of(std::span<const double> values);
};

struct WindowExtrema {
  TermRange sharpness;
  TermRange displacement;
  TermRange angle;
};

/// w1 * s + w2 * d + (1 - w1 - w2) * theta on window-normalized terms.
double importance(double sharp, double dis, double theta, const WindowExtrema& window,
                  const SelectionConfig& cfg);

/// The first frame is always kept. The remaining frames are visited in
/// consecutive windows of cfg.window frames; every frame of a window is
/// scored against the most recently selected keyframe and the top
/// cfg.keep_per_window are kept (ties go to the lower frame id). Output is in
/// temporal order with `importance` filled in.
std::vector<FrameRecord> select_keyframes(std::span<const FrameRecord> frames, const SelectionConfig& cfg);

}  // namespace ssrecon::keyframe
