#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <Eigen/SVD>
#include <json.hpp>

#include "ssrecon/error.hpp"
#include "ssrecon/image.hpp"
#include "ssrecon/pipeline/manifest.hpp"

namespace ssrecon::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ManifestSource source) {
  switch (source) {
    case ManifestSource::TransformsJson: return "transforms-json";
    case ManifestSource::ColmapText: return "colmap-text";
    case ManifestSource::Synthetic: return "synthetic";
  }
  return "unknown";
}

bool same_frames(const SceneManifest& a, const SceneManifest& b) {
  if (a.frames.size() != b.frames.size() || !(a.intrinsics == b.intrinsics) || a.scene_bound != b.scene_bound) {
    return false;
  }
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    const auto& fa = a.frames[i];
    const auto& fb = b.frames[i];
    if (fa.frame_id != fb.frame_id || fa.image_path != fb.image_path || fa.pose != fb.pose ||
        fa.sharpness != fb.sharpness || fa.importance != fb.importance) {
      return false;
    }
  }
  return true;
}

namespace {

const Eigen::Matrix3d kFlipYZ = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();

constexpr double kRigidTolerance = 1e-5;
constexpr double kSnapTolerance = 1e-3;

std::string absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

// Keeps rotations that are already orthonormal, snaps small drift to the
// nearest rotation and rejects the rest.
Eigen::Matrix3d validated_rotation(const Eigen::Matrix3d& r, const std::string& frame) {
  if (!r.allFinite()) throw Error(ErrorKind::NonRigidPose, frame + ": non-finite rotation");
  if (r.determinant() <= 0.0) throw Error(ErrorKind::NonRigidPose, frame + ": rotation has det <= 0 (reflection)");
  const double drift = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (drift <= kRigidTolerance) return r;
  if (drift > kSnapTolerance) {
    throw Error(ErrorKind::NonRigidPose, frame + ": rotation deviates from orthonormal by " + std::to_string(drift));
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double number_at(const json& obj, const char* key, const std::string& context) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorKind::Parse, context + ": missing field '" + key + "'");
  if (!it->is_number()) throw Error(ErrorKind::Parse, context + ": field '" + key + "' is not a number");
  return it->get<double>();
}

Eigen::Matrix4d matrix_at(const json& frame, const std::string& context) {
  const auto it = frame.find("transform_matrix");
  if (it == frame.end()) throw Error(ErrorKind::Parse, context + ": missing field 'transform_matrix'");
  const json& rows = *it;
  if (!rows.is_array() || rows.size() != 4) throw Error(ErrorKind::Parse, context + ".transform_matrix: expected 4 rows");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    if (!rows[r].is_array() || rows[r].size() != 4) {
      throw Error(ErrorKind::Parse, context + ".transform_matrix[" + std::to_string(r) + "]: expected 4 numbers");
    }
    for (int c = 0; c < 4; ++c) {
      if (!rows[r][c].is_number()) {
        throw Error(ErrorKind::Parse, context + ".transform_matrix[" + std::to_string(r) + "]: non-numeric entry");
      }
      m(r, c) = rows[r][c].get<double>();
    }
  }
  return m;
}

Intrinsics intrinsics_from(const json& root) {
  Intrinsics k;
  k.width = static_cast<int>(number_at(root, "w", "transforms"));
  k.height = static_cast<int>(number_at(root, "h", "transforms"));
  if (k.width < 1 || k.height < 1) throw Error(ErrorKind::Parse, "transforms: image size must be positive");
  if (root.contains("fl_x")) {
    k.fx = number_at(root, "fl_x", "transforms");
  } else if (root.contains("camera_angle_x")) {
    k.fx = 0.5 * k.width / std::tan(0.5 * number_at(root, "camera_angle_x", "transforms"));
  } else {
    throw Error(ErrorKind::Parse, "transforms: missing field 'fl_x' (or 'camera_angle_x')");
  }
  k.fy = root.contains("fl_y") ? number_at(root, "fl_y", "transforms") : k.fx;
  k.cx = root.contains("cx") ? number_at(root, "cx", "transforms") : 0.5 * k.width;
  k.cy = root.contains("cy") ? number_at(root, "cy", "transforms") : 0.5 * k.height;
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw Error(ErrorKind::Parse, "transforms: focal lengths must be positive");
  return k;
}

}  // namespace

CameraPose pose_from_opengl(const Eigen::Matrix4d& m) {
  CameraPose pose;
  pose.rotation = m.topLeftCorner<3, 3>() * kFlipYZ;
  pose.translation = m.topRightCorner<3, 1>();
  return pose;
}

Eigen::Matrix4d pose_to_opengl(const CameraPose& pose) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = pose.rotation * kFlipYZ;
  m.topRightCorner<3, 1>() = pose.translation;
  return m;
}

SceneManifest parse_transforms(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
  }
  if (!root.is_object()) throw Error(ErrorKind::Parse, file.string() + ": top level must be an object");

  SceneManifest manifest;
  manifest.source = ManifestSource::TransformsJson;
  manifest.intrinsics = intrinsics_from(root);
  if (root.contains("scene_bound")) {
    manifest.scene_bound = number_at(root, "scene_bound", "transforms");
  } else if (root.contains("aabb_scale")) {
    manifest.scene_bound = number_at(root, "aabb_scale", "transforms");
  }
  if (!(manifest.scene_bound > 0.0)) throw Error(ErrorKind::Parse, "transforms: scene bound must be positive");
  if (root.contains("source") && root["source"] == "synthetic") manifest.source = ManifestSource::Synthetic;

  const auto frames_it = root.find("frames");
  if (frames_it == root.end() || !frames_it->is_array()) {
    throw Error(ErrorKind::Parse, file.string() + ": missing 'frames' array");
  }
  const fs::path base = file.parent_path();
  struct Entry {
    std::string name;
    keyframe::FrameRecord record;
    bool has_id = false;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < frames_it->size(); ++i) {
    const json& f = (*frames_it)[i];
    const std::string context = "frames[" + std::to_string(i) + "]";
    if (!f.is_object() || !f.contains("file_path") || !f["file_path"].is_string()) {
      throw Error(ErrorKind::Parse, context + ": missing string field 'file_path'");
    }
    Entry e;
    e.name = f["file_path"].get<std::string>();
    const std::string frame_name = context + " (" + e.name + ")";
    const Eigen::Matrix4d m = matrix_at(f, context);
    if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > kRigidTolerance) {
      throw Error(ErrorKind::NonRigidPose, frame_name + ": bottom row is not [0 0 0 1]");
    }
    CameraPose pose = pose_from_opengl(m);
    pose.rotation = validated_rotation(pose.rotation, frame_name);
    if (!pose.translation.allFinite()) throw Error(ErrorKind::NonRigidPose, frame_name + ": non-finite translation");
    e.record.pose = pose;
    e.record.image_path = absolute_path(base / e.name);
    if (f.contains("frame_id")) {
      e.record.frame_id = static_cast<int>(number_at(f, "frame_id", context));
      e.has_id = true;
    }
    if (f.contains("sharpness")) e.record.sharpness = number_at(f, "sharpness", context);
    if (f.contains("importance")) e.record.importance = number_at(f, "importance", context);
    entries.push_back(std::move(e));
  }
  std::ranges::stable_sort(entries, {}, &Entry::name);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].has_id) entries[i].record.frame_id = static_cast<int>(i);
    manifest.frames.push_back(std::move(entries[i].record));
  }
  return manifest;
}

void write_transforms(const fs::path& file, const SceneManifest& manifest) {
  const fs::path dir = fs::absolute(file).parent_path();
  const Intrinsics& k = manifest.intrinsics;
  json root = {{"fl_x", k.fx}, {"fl_y", k.fy}, {"cx", k.cx},          {"cy", k.cy},
               {"w", k.width}, {"h", k.height}, {"scene_bound", manifest.scene_bound}};
  if (manifest.source == ManifestSource::Synthetic) root["source"] = "synthetic";
  json frames = json::array();
  for (const auto& f : manifest.frames) {
    if (!f.pose) throw Error(ErrorKind::MissingPose, "frame " + std::to_string(f.frame_id) + " has no pose");
    const Eigen::Matrix4d m = pose_to_opengl(*f.pose);
    json rows = json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    frames.push_back({{"file_path", fs::path(f.image_path).lexically_relative(dir).generic_string()},
                      {"transform_matrix", rows},
                      {"frame_id", f.frame_id},
                      {"sharpness", f.sharpness},
                      {"importance", f.importance}});
  }
  root["frames"] = std::move(frames);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + file.string());
  out << root.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + file.string());
}

namespace {

struct ColmapCamera {
  Intrinsics intrinsics;
  bool distorted = false;
  std::string model;
};

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

bool is_skippable(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

double to_number(const std::string& token, const fs::path& file, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, file.string() + ":" + std::to_string(line_no) + ": bad number '" + token + "'");
  }
}

std::map<int, ColmapCamera> read_cameras(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
  std::map<int, ColmapCamera> cameras;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (is_skippable(line)) continue;
    const auto tok = tokens_of(line);
    const std::string where = file.string() + ":" + std::to_string(line_no);
    if (tok.size() < 4) throw Error(ErrorKind::Parse, where + ": expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS");
    ColmapCamera cam;
    cam.model = tok[1];
    std::vector<double> p;
    for (std::size_t i = 4; i < tok.size(); ++i) p.push_back(to_number(tok[i], file, line_no));
    Intrinsics& k = cam.intrinsics;
    k.width = static_cast<int>(to_number(tok[2], file, line_no));
    k.height = static_cast<int>(to_number(tok[3], file, line_no));
    auto need = [&](std::size_t n) {
      if (p.size() != n) {
        throw Error(ErrorKind::Parse, where + ": " + cam.model + " expects " + std::to_string(n) + " parameters");
      }
    };
    if (cam.model == "SIMPLE_PINHOLE") {
      need(3);
      k.fx = k.fy = p[0], k.cx = p[1], k.cy = p[2];
    } else if (cam.model == "PINHOLE") {
      need(4);
      k.fx = p[0], k.fy = p[1], k.cx = p[2], k.cy = p[3];
    } else if (cam.model == "SIMPLE_RADIAL" || cam.model == "RADIAL") {
      need(cam.model == "RADIAL" ? 5 : 4);
      k.fx = k.fy = p[0], k.cx = p[1], k.cy = p[2];
      cam.distorted = std::any_of(p.begin() + 3, p.end(), [](double v) { return v != 0.0; });
    } else {
      throw Error(ErrorKind::UnsupportedCameraModel, where + ": camera model " + cam.model);
    }
    cameras[static_cast<int>(to_number(tok[0], file, line_no))] = cam;
  }
  return cameras;
}

}  // namespace

SceneManifest parse_colmap_text(const fs::path& cameras_file, const fs::path& images_file, const fs::path& image_dir) {
  const auto cameras = read_cameras(cameras_file);
  std::ifstream in(images_file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + images_file.string());
  const fs::path dir = image_dir.empty() ? images_file.parent_path() : image_dir;

  SceneManifest manifest;
  manifest.source = ManifestSource::ColmapText;
  std::vector<std::pair<std::string, keyframe::FrameRecord>> entries;
  std::optional<int> camera_id;
  bool warned = false;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (is_skippable(line)) continue;
    const auto tok = tokens_of(line);
    const std::string where = images_file.string() + ":" + std::to_string(line_no);
    if (tok.size() < 10) {
      throw Error(ErrorKind::Parse, where + ": expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME, got " +
                                        std::to_string(tok.size()) + " fields");
    }
    double v[7];
    for (int i = 0; i < 7; ++i) v[i] = to_number(tok[1 + i], images_file, line_no);
    const int cam = static_cast<int>(to_number(tok[8], images_file, line_no));
    const auto cam_it = cameras.find(cam);
    if (cam_it == cameras.end()) throw Error(ErrorKind::Parse, where + ": unknown camera id " + tok[8]);
    if (!camera_id) {
      camera_id = cam;
      manifest.intrinsics = cam_it->second.intrinsics;
    } else if (!(cam_it->second.intrinsics == manifest.intrinsics)) {
      throw Error(ErrorKind::Parse, where + ": images use cameras with different intrinsics");
    }
    if (cam_it->second.distorted && !warned) {
      manifest.warnings.push_back(cam_it->second.model + " distortion ignored; images treated as pinhole");
      warned = true;
    }
    keyframe::FrameRecord rec;
    std::string name = tok[9];
    for (std::size_t i = 10; i < tok.size(); ++i) name += " " + tok[i];
    try {
      rec.pose = keyframe::pose_from_world_to_camera(Eigen::Quaterniond(v[0], v[1], v[2], v[3]),
                                                     Eigen::Vector3d(v[4], v[5], v[6]));
    } catch (const Error& e) {
      throw e.with_context(where);
    }
    rec.image_path = absolute_path(dir / name);
    entries.emplace_back(name, std::move(rec));
    // The next line lists 2-D observations (possibly empty) and is skipped.
    if (std::getline(in, line)) ++line_no;
  }
  std::ranges::stable_sort(entries, {}, &std::pair<std::string, keyframe::FrameRecord>::first);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].second.frame_id = static_cast<int>(i);
    manifest.frames.push_back(std::move(entries[i].second));
  }
  return manifest;
}

void verify_images(const SceneManifest& manifest) {
  for (const auto& f : manifest.frames) {
    if (!fs::exists(f.image_path)) throw Error(ErrorKind::Io, "missing image " + f.image_path);
    const ImageF img = read_image(f.image_path);
    if (img.width() != manifest.intrinsics.width || img.height() != manifest.intrinsics.height) {
      throw Error(ErrorKind::ShapeMismatch, f.image_path + " is " + std::to_string(img.width()) + "x" +
                                                std::to_string(img.height()) + ", manifest expects " +
                                                std::to_string(manifest.intrinsics.width) + "x" +
                                                std::to_string(manifest.intrinsics.height));
    }
  }
}

}  // namespace ssrecon::pipeline
