#include <doctest.h>

#include <fstream>
#include <numbers>

#include "ssrecon/error.hpp"
#include "ssrecon/field/render.hpp"
#include "ssrecon/pipeline/config.hpp"
#include "ssrecon/pipeline/manifest.hpp"
#include "ssrecon/pipeline/pipeline.hpp"
#include "ssrecon/pipeline/synthetic.hpp"
#include "support.hpp"

using namespace ssrecon;
using namespace ssrecon::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Io;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

json minimal_transforms(const Eigen::Matrix4d& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return {{"fl_x", 50.0}, {"fl_y", 50.0}, {"cx", 16.0}, {"cy", 12.0}, {"w", 32}, {"h", 24},
          {"frames", {{{"file_path", "images/a.png"}, {"transform_matrix", rows}}}}};
}

}  // namespace

// ---- configuration ---------------------------------------------------------

TEST_CASE("nested and dotted config keys are equivalent") {
  PipelineConfig a, b;
  apply_config(a, json::parse(R"({"clahe": {"clip_limit": 0.02, "tiles": 4}, "train": {"steps": 7}})"));
  apply_config(b, json::parse(R"({"clahe.clip_limit": 0.02, "clahe.tiles": 4, "train.steps": 7})"));
  CHECK(config_to_json(a) == config_to_json(b));
  CHECK(a.enhance.clahe.clip_limit == 0.02);
  CHECK(a.enhance.clahe.tiles_x == 4);
  CHECK(a.enhance.clahe.tiles_y == 4);
  CHECK(a.train.steps == 7);
  CHECK(flatten(json::parse(R"({"a": {"b": {"c": 1}}, "d": [1, 2]})")) == json::parse(R"({"a.b.c": 1, "d": [1, 2]})"));
}

TEST_CASE("unknown keys and wrong types are config errors") {
  PipelineConfig cfg;
  CHECK(kind_of([&] { apply_config(cfg, json{{"train.stepz", 3}}); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_config(cfg, json{{"train.steps", "many"}}); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_config(cfg, json{{"train.sgd", 1}}); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_config(cfg, json{{"seed", -1}}); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_config(cfg, json{{"order", {"clahe", "blur"}}}); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_config(cfg, json{{"input_format", "video"}}); }) == ErrorKind::Config);
}

TEST_CASE("config_to_json round trips through apply_config and lists every key") {
  PipelineConfig cfg;
  apply_config(cfg, json::parse(R"({"mu": 2.0, "order": ["retinex", "clahe"], "grid.levels": 4,
                                    "deterministic": true, "seed": 9, "input_format": "transforms",
                                    "input": "scene/transforms.json", "stages.render": false})"));
  const json dumped = config_to_json(cfg);
  PipelineConfig again;
  apply_config(again, dumped);
  CHECK(config_to_json(again) == dumped);
  CHECK(again.enhance.order == std::vector<enhance::Stage>{enhance::Stage::Retinex, enhance::Stage::Clahe});
  CHECK_FALSE(again.stages.render);

  std::vector<std::string> keys;
  for (const auto& [k, v] : dumped.items()) keys.push_back(k);
  // Every emitted key is documented; aliases such as clahe.tiles are accepted but not emitted.
  const auto documented = config_keys();
  for (const auto& k : keys) CHECK(std::ranges::find(documented, k) != documented.end());
  CHECK(std::ranges::find(documented, "clahe.tiles") != documented.end());
  CHECK(std::ranges::find(keys, "clahe.tiles") == keys.end());
}

TEST_CASE("load_config reads a file and validates the result") {
  const auto dir = test::scratch_dir("cfg");
  write_text(dir / "ok.json", R"({"train": {"steps": 11}, "output": "elsewhere"})");
  const PipelineConfig cfg = load_config(dir / "ok.json");
  CHECK(cfg.train.steps == 11);
  CHECK(cfg.output_dir == fs::path("elsewhere"));
  write_text(dir / "bad.json", R"({"keyframe": {"w1": 0.9, "w2": 0.9}})");
  CHECK(kind_of([&] { load_config(dir / "bad.json"); }) == ErrorKind::Config);
  write_text(dir / "broken.json", "{ not json");
  CHECK(kind_of([&] { load_config(dir / "broken.json"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { load_config(dir / "missing.json"); }) == ErrorKind::Config);
  fs::remove_all(dir);
}

TEST_CASE("deterministic mode forces a single thread") {
  PipelineConfig cfg;
  cfg.threads = 4;
  CHECK(cfg.effective_threads() == 4);
  cfg.deterministic = true;
  CHECK(cfg.effective_threads() == 1);
  CHECK(stage_from_string(to_string(enhance::Stage::Retinex)) == enhance::Stage::Retinex);
  CHECK_THROWS_AS(stage_from_string("sharpen"), Error);
}

// ---- transforms.json -------------------------------------------------------

TEST_CASE("OpenGL pose conversion is an involution with the axis flip") {
  const CameraPose p = look_at(Eigen::Vector3d(1.0, 2.0, -3.0), Eigen::Vector3d::Zero());
  const Eigen::Matrix4d gl = pose_to_opengl(p);
  CHECK(gl.block<3, 1>(0, 2).isApprox(-p.rotation.col(2)));
  const CameraPose back = pose_from_opengl(gl);
  CHECK(back.rotation.isApprox(p.rotation, 1e-15));
  CHECK(back.translation == p.translation);
}

TEST_CASE("minimal transforms file with an identity frame") {
  const auto dir = test::scratch_dir("tf_min");
  write_text(dir / "transforms.json", minimal_transforms(Eigen::Matrix4d::Identity()).dump());
  const SceneManifest m = parse_transforms(dir / "transforms.json");
  REQUIRE(m.frames.size() == 1);
  CHECK(pose_to_opengl(*m.frames[0].pose).isApprox(Eigen::Matrix4d::Identity()));
  CHECK(m.frames[0].pose->translation == Eigen::Vector3d::Zero());
  CHECK(m.intrinsics == Intrinsics{50.0, 50.0, 16.0, 12.0, 32, 24});
  CHECK(m.frames[0].image_path == (dir / "images/a.png").lexically_normal().string());
  CHECK(m.source == ManifestSource::TransformsJson);
  fs::remove_all(dir);
}

TEST_CASE("transforms rotations: snapped near rigid, rejected otherwise") {
  const auto dir = test::scratch_dir("tf_rigid");
  Eigen::Matrix4d reflect = Eigen::Matrix4d::Identity();
  reflect(0, 0) = -1.0;
  write_text(dir / "reflect.json", minimal_transforms(reflect).dump());
  CHECK(kind_of([&] { parse_transforms(dir / "reflect.json"); }) == ErrorKind::NonRigidPose);
  CHECK(message_of([&] { parse_transforms(dir / "reflect.json"); }).find("a.png") != std::string::npos);

  Eigen::Matrix4d near = Eigen::Matrix4d::Identity();
  near(0, 1) = 4e-4;
  write_text(dir / "near.json", minimal_transforms(near).dump());
  CHECK(parse_transforms(dir / "near.json").frames[0].pose->is_rigid(1e-9));

  Eigen::Matrix4d far = Eigen::Matrix4d::Identity();
  far(0, 1) = 0.05;
  write_text(dir / "far.json", minimal_transforms(far).dump());
  CHECK(kind_of([&] { parse_transforms(dir / "far.json"); }) == ErrorKind::NonRigidPose);

  Eigen::Matrix4d bottom = Eigen::Matrix4d::Identity();
  bottom(3, 0) = 1.0;
  write_text(dir / "bottom.json", minimal_transforms(bottom).dump());
  CHECK(kind_of([&] { parse_transforms(dir / "bottom.json"); }) == ErrorKind::NonRigidPose);
  fs::remove_all(dir);
}

TEST_CASE("malformed transforms files are parse errors with field context") {
  const auto dir = test::scratch_dir("tf_bad");
  json j = minimal_transforms(Eigen::Matrix4d::Identity());
  j.erase("fl_x");
  write_text(dir / "nofocal.json", j.dump());
  CHECK(kind_of([&] { parse_transforms(dir / "nofocal.json"); }) == ErrorKind::Parse);
  j = minimal_transforms(Eigen::Matrix4d::Identity());
  j["frames"][0]["transform_matrix"].erase(3);
  write_text(dir / "rows.json", j.dump());
  CHECK(message_of([&] { parse_transforms(dir / "rows.json"); }).find("transform_matrix") != std::string::npos);
  write_text(dir / "text.json", "[1, 2");
  CHECK(kind_of([&] { parse_transforms(dir / "text.json"); }) == ErrorKind::Parse);

  // camera_angle_x stands in for fl_x.
  j = minimal_transforms(Eigen::Matrix4d::Identity());
  j.erase("fl_x");
  j.erase("fl_y");
  j["camera_angle_x"] = 2.0 * std::atan(16.0 / 40.0);
  write_text(dir / "angle.json", j.dump());
  const auto k = parse_transforms(dir / "angle.json").intrinsics;
  CHECK(k.fx == doctest::Approx(40.0));
  CHECK(k.fy == doctest::Approx(40.0));
  fs::remove_all(dir);
}

TEST_CASE("transforms emit and parse round trip") {
  const auto dir = test::scratch_dir("tf_rt");
  SceneManifest m;
  m.intrinsics = {60.0, 61.0, 20.0, 15.5, 40, 30};
  m.scene_bound = 2.5;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    keyframe::FrameRecord f;
    f.frame_id = i * 3;
    f.image_path = (dir / "images" / ("f" + std::to_string(i) + ".png")).string();
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    CameraPose p;
    p.rotation = q.toRotationMatrix();
    p.translation = {n(rng), n(rng), n(rng)};
    f.pose = p;
    f.sharpness = 0.1 * i;
    f.importance = 0.05 * i;
    m.frames.push_back(f);
  }
  write_transforms(dir / "transforms.json", m);
  const SceneManifest back = parse_transforms(dir / "transforms.json");
  CHECK(same_frames(m, back));
  write_transforms(dir / "again.json", back);
  CHECK(same_frames(back, parse_transforms(dir / "again.json")));
  fs::remove_all(dir);
}

// ---- COLMAP text -----------------------------------------------------------

TEST_CASE("COLMAP text model parsing") {
  const auto dir = test::scratch_dir("colmap");
  write_text(dir / "cameras.txt", "# comment\n1 PINHOLE 32 24 50 51 16 12\n2 SIMPLE_RADIAL 32 24 50 16 12 0.01\n");
  const Eigen::Quaterniond q(Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 2, 3).normalized()));
  std::ostringstream images;
  images.precision(17);
  images << "# header\n";
  images << "1 1 0 0 0 0 0 0 1 b.png\n\n";
  images << "2 " << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << " 0.5 -1 2 1 a.png\n1.0 2.0 -1\n";
  write_text(dir / "images.txt", images.str());
  const SceneManifest m = parse_colmap_text(dir / "cameras.txt", dir / "images.txt");
  REQUIRE(m.frames.size() == 2);
  CHECK(m.source == ManifestSource::ColmapText);
  CHECK(m.intrinsics == Intrinsics{50, 51, 16, 12, 32, 24});
  // Sorted by name: a.png first.
  CHECK(fs::path(m.frames[0].image_path).filename() == "a.png");
  CHECK(m.frames[1].pose->rotation.isApprox(Eigen::Matrix3d::Identity()));
  CHECK(m.frames[1].pose->translation.norm() == 0.0);
  const CameraPose oracle = keyframe::pose_from_world_to_camera(q, Eigen::Vector3d(0.5, -1, 2));
  Eigen::Matrix4d w2c = Eigen::Matrix4d::Identity();
  w2c.topLeftCorner<3, 3>() = q.toRotationMatrix();
  w2c.topRightCorner<3, 1>() = Eigen::Vector3d(0.5, -1, 2);
  CHECK((m.frames[0].pose->matrix() * w2c - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(m.frames[0].pose->rotation.isApprox(oracle.rotation));

  write_text(dir / "images_radial.txt", "1 1 0 0 0 0 0 0 2 a.png\n\n");
  const SceneManifest radial = parse_colmap_text(dir / "cameras.txt", dir / "images_radial.txt");
  CHECK(radial.intrinsics.fx == 50.0);
  CHECK(radial.intrinsics.fy == 50.0);
  CHECK_FALSE(radial.warnings.empty());
  fs::remove_all(dir);
}

TEST_CASE("COLMAP errors") {
  const auto dir = test::scratch_dir("colmap_bad");
  write_text(dir / "cameras.txt", "1 PINHOLE 32 24 50 51 16 12\n3 OPENCV_FISHEYE 32 24 1 1 1 1 0 0 0 0\n");
  write_text(dir / "images.txt", "# header\n1 1 0 0 0 0 0 0 1 a.png\n\n2 1 0 0\n");
  CHECK(kind_of([&] { parse_colmap_text(dir / "cameras.txt", dir / "images.txt"); }) == ErrorKind::UnsupportedCameraModel);
  write_text(dir / "cameras.txt", "1 PINHOLE 32 24 50 51 16 12\n");
  CHECK(kind_of([&] { parse_colmap_text(dir / "cameras.txt", dir / "images.txt"); }) == ErrorKind::Parse);
  CHECK(message_of([&] { parse_colmap_text(dir / "cameras.txt", dir / "images.txt"); }).find("images.txt:4") !=
        std::string::npos);
  write_text(dir / "images.txt", "1 2 0 0 0 0 0 0 1 a.png\n\n");
  CHECK(kind_of([&] { parse_colmap_text(dir / "cameras.txt", dir / "images.txt"); }) == ErrorKind::NonUnitQuaternion);
  write_text(dir / "images.txt", "1 1 0 0 0 0 0 0 7 a.png\n\n");
  CHECK(kind_of([&] { parse_colmap_text(dir / "cameras.txt", dir / "images.txt"); }) == ErrorKind::Parse);
  fs::remove_all(dir);
}

// ---- synthetic scenes ------------------------------------------------------

TEST_CASE("sphere scene density profile") {
  const SphereScene s;
  CHECK(s.density_at(Eigen::Vector3d::Zero()) == 25.0);
  CHECK(s.density_at(Eigen::Vector3d(0.65, 0, 0)) == 0.0);
  CHECK(s.density_at(Eigen::Vector3d(0.6, 0, 0)) == doctest::Approx(12.5));
  CHECK(s.color_at(Eigen::Vector3d(0.1, 0.2, 0.5)) == s.color_at(Eigen::Vector3d(0.1, 0.2, -0.5)));
  SyntheticSpec bad;
  bad.views = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SyntheticSpec{};
  bad.scene = "teapot";
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("synthetic rig: antipodal pairs looking at the origin") {
  SyntheticSpec spec;
  const auto poses = synthetic_poses(spec);
  REQUIRE(poses.size() == 12u);
  CHECK(std::abs(std::abs(poses[0].translation.z()) - 2.5) < 1e-12);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK(poses[i].is_rigid());
    CHECK(poses[i].translation.norm() == doctest::Approx(2.5));
    CHECK((poses[i].view_direction() + poses[i].translation.normalized()).norm() < 1e-12);
    if (i % 2 == 1) CHECK((poses[i].translation + poses[i - 1].translation).norm() < 1e-12);
  }
  const Intrinsics k = synthetic_intrinsics(spec);
  CHECK(k.fx == 80.0);
  CHECK(k.cx == 32.0);
}

TEST_CASE("synthetic scene generation is self-consistent") {
  const auto dir = test::scratch_dir("synth");
  SyntheticSpec spec;
  spec.views = 2;
  spec.width = spec.height = 24;
  spec.render_samples = 256;
  const SceneManifest m = generate_synthetic_scene(spec, dir);
  CHECK(m.source == ManifestSource::Synthetic);
  REQUIRE(m.frames.size() == 2u);
  CHECK(fs::exists(dir / "images/view_000.png"));
  CHECK(fs::exists(dir / "analytic_field.json"));
  CHECK(same_frames(m, parse_transforms(dir / "transforms.json")));
  verify_images(m);

  const ImageF a = read_image(m.frames[0].image_path);
  const ImageF b = read_image(m.frames[1].image_path);
  // Corners see only empty space.
  for (int c = 0; c < 3; ++c) CHECK(a(0, 0, c) == 0.0);
  // The scene is mirror symmetric in z, so the antipodal view is a flip.
  const ImageF flipped = flip_horizontal(a);
  double worst = 0.0;
  for (std::size_t i = 0; i < b.samples().size(); ++i) worst = std::max(worst, std::abs(flipped.samples()[i] - b.samples()[i]));
  CHECK(worst <= 2.0 / 65535);

  // Re-rendering the exported poses with the exported field reproduces the images.
  const SphereScene scene = read_analytic_field(dir / "analytic_field.json");
  field::RenderConfig rc;
  rc.samples_per_ray = spec.render_samples;
  rc.scene_bound = m.scene_bound;
  for (const auto& f : m.frames) {
    const ImageF again = field::render_view(*f.pose, m.intrinsics, scene.analytic_field(), rc);
    const ImageF stored = read_image(f.image_path);
    double err = 0.0;
    for (std::size_t i = 0; i < again.samples().size(); ++i) err = std::max(err, std::abs(again.samples()[i] - stored.samples()[i]));
    CHECK(err <= 1e-3);
  }
  fs::remove_all(dir);
}

TEST_CASE("analytic field description round trips") {
  const auto dir = test::scratch_dir("analytic");
  SphereScene s;
  s.radius = 0.45;
  s.medium_density = 0.3;
  write_analytic_field(dir / "f.json", s);
  const SphereScene back = read_analytic_field(dir / "f.json");
  CHECK(back.radius == 0.45);
  CHECK(back.medium_density == 0.3);
  CHECK(back.density == s.density);
  CHECK(back.medium_color == s.medium_color);
  fs::remove_all(dir);
}

TEST_CASE("verify_images catches missing and mismatched files") {
  const auto dir = test::scratch_dir("verify");
  SceneManifest m;
  m.intrinsics = {10, 10, 4, 4, 8, 8};
  keyframe::FrameRecord f;
  f.image_path = (dir / "x.png").string();
  f.pose = CameraPose{};
  m.frames.push_back(f);
  CHECK(kind_of([&] { verify_images(m); }) == ErrorKind::Io);
  write_image(dir / "x.png", test::random_image(9, 8, 1));
  CHECK(kind_of([&] { verify_images(m); }) == ErrorKind::ShapeMismatch);
  fs::remove_all(dir);
}

// ---- orchestration ---------------------------------------------------------

TEST_CASE("a pipeline with every stage disabled reports no stages") {
  const auto dir = test::scratch_dir("pipe_off");
  PipelineConfig cfg;
  cfg.stages = {false, false, false, false, false};
  cfg.output_dir = dir / "out";
  const json report = run_pipeline(cfg);
  CHECK(report["stages"].empty());
  CHECK(fs::exists(dir / "out/report.json"));
  fs::remove_all(dir);
}

TEST_CASE("evaluate_frames aggregates and handles missing references") {
  const ImageF a = test::random_image(16, 16, 1);
  const ImageF b = test::random_image(16, 16, 2);
  std::vector<EvaluatedFrame> frames{{3, a, b}, {5, a, a}, {8, b, std::nullopt}};
  const json r = evaluate_frames(frames, metrics::SsimConfig{});
  REQUIRE(r["frames"].size() == 3u);
  CHECK(r["frames"][2]["psnr"].is_null());
  CHECK(r["aggregates"]["psnr"]["count"] == 2);
  CHECK(r["aggregates"]["psnr"]["mean"].get<double>() == doctest::Approx(0.5 * (metrics::psnr(a, b) + 99.0)));
  CHECK(r["aggregates"]["uiqm"]["count"] == 3);
  CHECK(r["metadata"]["color_space"] == metrics::kUciqeColorSpace);
  const json timed = {{"a", 1}, {"elapsed_s", 2.0}, {"b", {{"elapsed_s", 3.0}, {"c", 4}}}};
  CHECK(strip_timing(timed) == json{{"a", 1}, {"b", {{"c", 4}}}});
}

TEST_CASE("stage errors carry the stage name") {
  const auto dir = test::scratch_dir("pipe_err");
  PipelineConfig cfg;
  cfg.input_format = InputFormat::Transforms;
  cfg.input = dir / "nowhere.json";
  cfg.output_dir = dir / "out";
  CHECK(message_of([&] { run_pipeline(cfg); }).find("input") != std::string::npos);
  fs::remove_all(dir);
}
