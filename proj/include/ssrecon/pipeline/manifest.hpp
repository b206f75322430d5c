#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ssrecon/camera.hpp"
#include "ssrecon/keyframe.hpp"

namespace ssrecon::pipeline {

enum class ManifestSource { TransformsJson, ColmapText, Synthetic };

std::string to_string(ManifestSource source);

/// Frames with poses, shared pinhole intrinsics and the scene cube
/// half-extent. Image paths are absolute and lexically normalized.
struct SceneManifest {
  std::vector<keyframe::FrameRecord> frames;
  Intrinsics intrinsics;
  double scene_bound = 1.0;
  ManifestSource source = ManifestSource::TransformsJson;
  std::vector<std::string> warnings;
};

bool same_frames(const SceneManifest& a, const SceneManifest& b);

/// transforms.json stores camera-to-world matrices in the OpenGL camera
/// convention (+y up, looking down -z); internal poses look down +z with +y
/// down. The two differ by diag(1, -1, -1) on the right of the rotation.
CameraPose pose_from_opengl(const Eigen::Matrix4d& m);
Eigen::Matrix4d pose_to_opengl(const CameraPose& pose);

/// Reads an Instant-NGP style transforms file. Rotations off by at most 1e-3
/// from orthonormal are snapped to the nearest rotation; anything further
/// away, or a reflection, is rejected with NonRigidPose. Frames are sorted by
/// file name and numbered in that order unless they carry a frame_id.
SceneManifest parse_transforms(const std::filesystem::path& file);

/// Writes `manifest` so that parse_transforms(file) reproduces it. Image
/// paths are stored relative to the file's directory; per-frame sharpness
/// and importance are kept.
void write_transforms(const std::filesystem::path& file, const SceneManifest& manifest);

/// COLMAP sparse text model. PINHOLE and SIMPLE_PINHOLE are used as is;
/// SIMPLE_RADIAL and RADIAL keep their focal length and principal point and
/// drop the distortion with a warning. Image names resolve against
/// `image_dir` (defaults to the images file's directory).
SceneManifest parse_colmap_text(const std::filesystem::path& cameras_file, const std::filesystem::path& images_file,
                                const std::filesystem::path& image_dir = {});

/// Every frame's image exists and matches the manifest intrinsics.
void verify_images(const SceneManifest& manifest);

}  // namespace ssrecon::pipeline
