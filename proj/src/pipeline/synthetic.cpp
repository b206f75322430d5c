#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "ssrecon/error.hpp"
#include "ssrecon/image.hpp"
#include "ssrecon/pipeline/synthetic.hpp"

namespace ssrecon::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

double SphereScene::density_at(const field::Vec3& x) const {
  const double r = x.norm();
  double inside = 0.0;
  if (r <= radius - edge) {
    inside = 1.0;
  } else if (r < radius + edge) {
    const double s = (radius + edge - r) / (2.0 * edge);
    inside = s * s * (3.0 - 2.0 * s);
  }
  return density * inside + medium_density;
}

field::Rgb SphereScene::color_at(const field::Vec3& x) const {
  const double u = std::clamp(x.x() / radius, -1.0, 1.0);
  const double v = std::clamp(x.y() / radius, -1.0, 1.0);
  const field::Rgb sphere(0.5 + 0.4 * u, 0.5 + 0.4 * v, 0.5 - 0.3 * u);
  if (medium_density <= 0.0) return sphere;
  // Blend by density share so the medium keeps its own color outside.
  const double total = density_at(x);
  const double w = (total - medium_density) / total;
  return w * sphere + (1.0 - w) * medium_color;
}

field::AnalyticField SphereScene::analytic_field() const {
  const SphereScene s = *this;
  return field::AnalyticField([s](const field::Vec3& x) { return s.density_at(x); },
                              [s](const field::Vec3& x, const field::Vec3&) { return s.color_at(x); });
}

void SyntheticSpec::validate() const {
  if (scene != "sphere") throw Error(ErrorKind::Config, "unknown synthetic scene '" + scene + "'");
  if (views < 1) throw Error(ErrorKind::Config, "synthetic views must be >= 1");
  if (width < 8 || height < 8) throw Error(ErrorKind::Config, "synthetic images must be at least 8x8");
  if (focal < 0.0 || !(camera_distance > scene_bound * std::sqrt(3.0))) {
    throw Error(ErrorKind::Config, "synthetic cameras must sit outside the scene cube");
  }
  if (render_samples < 1) throw Error(ErrorKind::Config, "synthetic render_samples must be >= 1");
  if (!(sphere.radius > sphere.edge) || !(sphere.edge > 0.0) || sphere.density < 0.0 || sphere.medium_density < 0.0) {
    throw Error(ErrorKind::Config, "invalid sphere parameters");
  }
}

std::vector<CameraPose> synthetic_poses(const SyntheticSpec& spec) {
  const int pairs = (spec.views + 1) / 2;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<CameraPose> poses;
  for (int k = 0; k < pairs; ++k) {
    const double z = 1.0 - static_cast<double>(k) / pairs;
    const double ring = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d d(ring * std::cos(k * golden), ring * std::sin(k * golden), z);
    for (const double sign : {1.0, -1.0}) {
      if (static_cast<int>(poses.size()) == spec.views) break;
      poses.push_back(look_at(sign * spec.camera_distance * d, Eigen::Vector3d::Zero()));
    }
  }
  return poses;
}

Intrinsics synthetic_intrinsics(const SyntheticSpec& spec) {
  const double f = spec.focal > 0.0 ? spec.focal : 1.25 * spec.width;
  return {f, f, 0.5 * spec.width, 0.5 * spec.height, spec.width, spec.height};
}

void write_analytic_field(const fs::path& file, const SphereScene& s) {
  const json j = {{"scene", "sphere"},
                  {"radius", s.radius},
                  {"edge", s.edge},
                  {"density", s.density},
                  {"medium_density", s.medium_density},
                  {"medium_color", {s.medium_color.x(), s.medium_color.y(), s.medium_color.z()}}};
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + file.string());
  out << j.dump(2) << '\n';
}

SphereScene read_analytic_field(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
  try {
    const json j = json::parse(in);
    SphereScene s;
    s.radius = j.at("radius").get<double>();
    s.edge = j.at("edge").get<double>();
    s.density = j.at("density").get<double>();
    s.medium_density = j.at("medium_density").get<double>();
    const auto c = j.at("medium_color").get<std::vector<double>>();
    if (c.size() != 3) throw Error(ErrorKind::Parse, "medium_color needs 3 entries");
    s.medium_color = field::Rgb(c[0], c[1], c[2]);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
  }
}

SceneManifest generate_synthetic_scene(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

  SceneManifest manifest;
  manifest.source = ManifestSource::Synthetic;
  manifest.intrinsics = synthetic_intrinsics(spec);
  manifest.scene_bound = spec.scene_bound;

  const field::AnalyticField source = spec.sphere.analytic_field();
  field::RenderConfig rc;
  rc.samples_per_ray = spec.render_samples;
  rc.scene_bound = spec.scene_bound;
  const auto poses = synthetic_poses(spec);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%03zu.png", i);
    const fs::path path = out_dir / "images" / name;
    write_image(path, field::render_view(poses[i], manifest.intrinsics, source, rc), 16);
    keyframe::FrameRecord rec;
    rec.frame_id = static_cast<int>(i);
    rec.image_path = fs::absolute(path).lexically_normal().string();
    rec.pose = poses[i];
    manifest.frames.push_back(std::move(rec));
  }
  write_transforms(out_dir / "transforms.json", manifest);
  write_analytic_field(out_dir / "analytic_field.json", spec.sphere);
  return manifest;
}

}  // namespace ssrecon::pipeline
