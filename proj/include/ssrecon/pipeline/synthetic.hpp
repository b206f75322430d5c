#pragma once

#include <filesystem>
#include <string>

#include "ssrecon/field/render.hpp"
#include "ssrecon/pipeline/manifest.hpp"

namespace ssrecon::pipeline {

/// Soft-edged colored sphere centered at the origin, optionally inside a
/// homogeneous absorbing medium that fills the scene cube. Density falls
/// from `density` to zero over [radius - edge, radius + edge] with a
/// smoothstep, so it is exactly zero beyond radius + edge. Color depends on
/// (x, y) only, which makes the scene mirror-symmetric in z.
struct SphereScene {
  double radius = 0.6;
  double edge = 0.05;
  double density = 25.0;
  double medium_density = 0.0;
  field::Rgb medium_color{0.1, 0.3, 0.4};

  double density_at(const field::Vec3& x) const;
  field::Rgb color_at(const field::Vec3& x) const;
  field::AnalyticField analytic_field() const;
};

struct SyntheticSpec {
  std::string scene = "sphere";
  int views = 12;
  int width = 64;
  int height = 64;
  /// Focal length in pixels; 0 picks 1.25 * width.
  double focal = 0.0;
  double camera_distance = 2.5;
  double scene_bound = 1.0;
  /// Midpoint quadrature samples for the reference images.
  int render_samples = 512;
  SphereScene sphere;

  void validate() const;
};

/// Camera-to-world poses of the synthetic rig. Views come in antipodal pairs
/// (2k, 2k + 1) looking at the origin; the first pair sits on the z axis.
std::vector<CameraPose> synthetic_poses(const SyntheticSpec& spec);
Intrinsics synthetic_intrinsics(const SyntheticSpec& spec);

/// Renders every view of `spec` with the analytic field and writes
///   out_dir/images/view_NNN.png   (16-bit)
///   out_dir/transforms.json
///   out_dir/analytic_field.json
SceneManifest generate_synthetic_scene(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

void write_analytic_field(const std::filesystem::path& file, const SphereScene& scene);
SphereScene read_analytic_field(const std::filesystem::path& file);

}  // namespace ssrecon::pipeline
