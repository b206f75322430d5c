#include <doctest.h>

#include <fstream>

#include "ssrecon/image.hpp"
#include "ssrecon/pipeline/pipeline.hpp"
#include "ssrecon/pipeline/synthetic.hpp"
#include "support.hpp"

using namespace ssrecon;
using namespace ssrecon::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const fs::path& out) {
  PipelineConfig cfg;
  apply_config(cfg, json{{"train.steps", 40},
                         {"train.rays_per_batch", 64},
                         {"train.samples_per_ray", 16},
                         {"grid.levels", 4},
                         {"grid.table_size_log2", 10},
                         {"render.samples", 16},
                         {"keyframe.window", 4},
                         {"keyframe.keep", 2},
                         {"clahe.tiles", 2},
                         {"deterministic", true}});
  cfg.output_dir = out;
  return cfg;
}

}  // namespace

TEST_CASE("transforms input through every stage with enhancement on") {
  const auto dir = test::scratch_dir("integration");
  SyntheticSpec spec;
  spec.views = 10;
  spec.width = spec.height = 16;
  spec.render_samples = 64;
  generate_synthetic_scene(spec, dir / "scene");

  PipelineConfig cfg = small_config(dir / "out");
  cfg.input_format = InputFormat::Transforms;
  cfg.input = dir / "scene/transforms.json";
  const json report = run_pipeline(cfg);

  std::vector<std::string> names;
  for (const auto& s : report["stages"]) names.push_back(s["name"]);
  CHECK(names == std::vector<std::string>{"enhance", "keyframes", "train", "render", "metrics"});
  CHECK(report["input"]["frames"] == 10);
  // The generator tags its transforms file, so the source survives the round trip.
  CHECK(report["input"]["source"] == "synthetic");

  const json& enh = report["stages"][0];
  CHECK(enh["frames"] == 10);
  CHECK(fs::is_directory(dir / "out" / enh["directory"].get<std::string>()));

  // Frame 0, then two of each window of four over frames 1..9 (the last window holds one).
  const json& kf = report["stages"][1];
  const json& selected = kf["selected"];
  REQUIRE(selected.size() == 6u);
  CHECK(selected[0] == 0);
  const auto manifest = parse_transforms(dir / "out" / kf["manifest"].get<std::string>());
  REQUIRE(manifest.frames.size() == selected.size());
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    CHECK(manifest.frames[i].frame_id == selected[i].get<int>());
    CHECK(fs::exists(manifest.frames[i].image_path));
    CHECK(manifest.frames[i].image_path.find("enhanced") != std::string::npos);
  }

  // Every eighth keyframe is held out.
  CHECK(report["split"]["held_out"] == json::array({selected[0]}));
  CHECK(report["split"]["training"].size() == 5u);

  const json& tr = report["stages"][2];
  CHECK(tr["steps"] == 40);
  CHECK(fs::exists(dir / "out" / tr["checkpoint"].get<std::string>()));
  CHECK(fs::exists(dir / "out" / tr["log"].get<std::string>()));

  const json& views = report["stages"][3]["views"];
  REQUIRE(views.size() == 1u);
  for (const auto& v : views) {
    const ImageF img = read_image(dir / "out" / v["path"].get<std::string>());
    CHECK(img.width() == 16);
    CHECK(img.height() == 16);
  }

  const json& held = report["stages"][4]["held_out"];
  REQUIRE(held["frames"].size() == 1u);
  CHECK(held["aggregates"]["psnr"]["count"] == 1);
  CHECK(report["held_out_psnr"].get<double>() == doctest::Approx(held["aggregates"]["psnr"]["mean"].get<double>()));

  const json on_disk = json::parse(std::ifstream(dir / "out/report.json"));
  CHECK(strip_timing(on_disk) == strip_timing(report));
  fs::remove_all(dir);
}

TEST_CASE("deterministic pipeline runs agree apart from timing") {
  const auto dir = test::scratch_dir("integration_repeat");
  PipelineConfig a = small_config(dir / "a");
  a.synthetic.views = 6;
  a.synthetic.width = a.synthetic.height = 16;
  PipelineConfig b = a;
  b.output_dir = dir / "b";
  json ra = strip_timing(run_pipeline(a));
  json rb = strip_timing(run_pipeline(b));
  // Relative paths keep the reports comparable; only the config's output entry differs.
  ra.erase("config");
  rb.erase("config");
  CHECK(ra == rb);
  CHECK(ra["held_out_psnr"] == rb["held_out_psnr"]);
  CHECK(ra["stages"][2]["final_loss"] == rb["stages"][2]["final_loss"]);
  CHECK(ra["stages"][1]["selected"] == rb["stages"][1]["selected"]);
  fs::remove_all(dir);
}
