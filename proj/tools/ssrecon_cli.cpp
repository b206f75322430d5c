// Command-line front end: one subcommand per pipeline stage plus the full
// pipeline. Exit status: 0 success, 2 invalid input or configuration,
// 3 numerical failure, 1 anything unexpected.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssrecon/error.hpp"
#include "ssrecon/field/checkpoint.hpp"
#include "ssrecon/field/render.hpp"
#include "ssrecon/image.hpp"
#include "ssrecon/keyframe.hpp"
#include "ssrecon/pipeline/config.hpp"
#include "ssrecon/pipeline/manifest.hpp"
#include "ssrecon/pipeline/pipeline.hpp"
#include "ssrecon/pipeline/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssrecon;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct Globals {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::string> out;
};

pipeline::PipelineConfig resolve_config(const Globals& g) {
  pipeline::PipelineConfig cfg = g.config_file.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(g.config_file);
  if (g.seed) cfg.seed = *g.seed;
  if (g.deterministic) cfg.deterministic = true;
  if (g.out) cfg.output_dir = *g.out;
  return cfg;
}

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Files are taken as given; directories contribute their images in
// lexicographic order.
std::vector<fs::path> expand_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && is_image(e.path())) found.push_back(e.path());
      }
      std::ranges::sort(found);
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.emplace_back(in);
    } else {
      throw Error(ErrorKind::Io, "no such file or directory: " + in);
    }
  }
  return files;
}

pipeline::SceneManifest manifest_from(const std::string& transforms, const std::string& colmap,
                                      const std::string& colmap_images) {
  if (!transforms.empty() && !colmap.empty()) throw Error(ErrorKind::Config, "give --manifest or --colmap, not both");
  if (!transforms.empty()) return pipeline::parse_transforms(transforms);
  if (!colmap.empty()) {
    const fs::path dir = colmap;
    return pipeline::parse_colmap_text(dir / "cameras.txt", dir / "images.txt", colmap_images);
  }
  throw Error(ErrorKind::Config, "a pose source is required (--manifest or --colmap)");
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_enhance(const Globals& g, const std::vector<std::string>& inputs) {
  const auto cfg = resolve_config(g);
  cfg.enhance.validate();
  json written = json::array();
  for (const fs::path& file : expand_images(inputs)) {
    const auto result = enhance::enhance_frame(read_image(file), cfg.enhance);
    const fs::path dest = cfg.output_dir / (file.stem().string() + ".png");
    write_image(dest, result.image, 8);
    written.push_back({{"input", file.generic_string()},
                       {"output", dest.generic_string()},
                       {"zero_spread", result.zero_spread}});
  }
  print_json({{"enhanced", written}});
  return 0;
}

int cmd_keyframes(const Globals& g, const std::string& manifest_file, const std::string& colmap,
                  const std::string& colmap_images) {
  const auto cfg = resolve_config(g);
  auto manifest = manifest_from(manifest_file, colmap, colmap_images);
  pipeline::verify_images(manifest);
  for (auto& f : manifest.frames) f.sharpness = keyframe::sharpness(read_image(f.image_path));
  manifest.frames = keyframe::select_keyframes(manifest.frames, cfg.selection);
  const fs::path dest = cfg.output_dir / "keyframes.json";
  pipeline::write_transforms(dest, manifest);
  json selected = json::array();
  for (const auto& f : manifest.frames) {
    selected.push_back({{"frame_id", f.frame_id}, {"sharpness", f.sharpness}, {"importance", f.importance}});
  }
  print_json({{"manifest", dest.generic_string()}, {"selected", selected}});
  return 0;
}

int cmd_train(const Globals& g, const std::string& manifest_file, std::optional<int> steps) {
  auto cfg = resolve_config(g);
  if (steps) cfg.train.steps = *steps;
  const auto manifest = pipeline::parse_transforms(manifest_file);
  pipeline::verify_images(manifest);
  field::FieldConfig field_cfg = cfg.field;
  field_cfg.grid.scene_bound = cfg.scene_bound > 0.0 ? cfg.scene_bound : manifest.scene_bound;
  field::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.threads = cfg.effective_threads();
  if (cfg.deterministic) tc.occupancy = false;
  const auto views = pipeline::load_views(manifest, manifest.frames);
  const fs::path out = cfg.output_dir;
  const auto result = pipeline::train_field(views, field_cfg, tc, out / "train_log.jsonl", out / "checkpoint.ssck");
  print_json({{"steps", result.steps},
              {"final_loss", result.final_loss},
              {"final_psnr_train", field::loss_to_psnr(result.final_loss)},
              {"checkpoint", (out / "checkpoint.ssck").generic_string()},
              {"log", (out / "train_log.jsonl").generic_string()}});
  return 0;
}

int cmd_render(const Globals& g, const std::string& checkpoint, const std::string& manifest_file,
               const std::vector<int>& frame_ids) {
  const auto cfg = resolve_config(g);
  const auto params = field::load_checkpoint(checkpoint);
  const auto manifest = pipeline::parse_transforms(manifest_file);
  const field::NeuralField source(params);
  field::RenderConfig rc;
  rc.samples_per_ray = cfg.render_samples;
  rc.scene_bound = params.config().grid.scene_bound;
  rc.threads = cfg.effective_threads();
  json written = json::array();
  for (const auto& f : manifest.frames) {
    if (!frame_ids.empty() && std::ranges::find(frame_ids, f.frame_id) == frame_ids.end()) continue;
    if (!f.pose) throw Error(ErrorKind::MissingPose, "frame " + std::to_string(f.frame_id));
    const fs::path dest = cfg.output_dir / (fs::path(f.image_path).stem().string() + ".png");
    write_image(dest, field::render_view(*f.pose, manifest.intrinsics, source, rc), 16);
    written.push_back({{"frame_id", f.frame_id}, {"output", dest.generic_string()}});
  }
  print_json({{"rendered", written}});
  return 0;
}

int cmd_metrics(const Globals& g, const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
  const auto cfg = resolve_config(g);
  const auto pred_files = expand_images(pred);
  const auto ref_files = ref.empty() ? std::vector<fs::path>{} : expand_images(ref);
  if (!ref_files.empty() && ref_files.size() != pred_files.size()) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(pred_files.size()) + " predictions but " +
                                              std::to_string(ref_files.size()) + " references");
  }
  std::vector<pipeline::EvaluatedFrame> frames;
  for (std::size_t i = 0; i < pred_files.size(); ++i) {
    pipeline::EvaluatedFrame f{static_cast<int>(i), read_image(pred_files[i]), std::nullopt};
    if (!ref_files.empty()) f.reference = read_image(ref_files[i]);
    frames.push_back(std::move(f));
  }
  json result = pipeline::evaluate_frames(frames, cfg.ssim);
  for (std::size_t i = 0; i < pred_files.size(); ++i) {
    result["frames"][i]["prediction"] = pred_files[i].generic_string();
    if (!ref_files.empty()) result["frames"][i]["reference"] = ref_files[i].generic_string();
  }
  fs::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "metrics.json") << result.dump(2) << '\n';
  print_json(result);
  return 0;
}

int cmd_synthesize(const Globals& g, std::optional<int> views, std::optional<int> size) {
  auto cfg = resolve_config(g);
  if (views) cfg.synthetic.views = *views;
  if (size) cfg.synthetic.width = cfg.synthetic.height = *size;
  if (cfg.scene_bound > 0.0) cfg.synthetic.scene_bound = cfg.scene_bound;
  const auto manifest = pipeline::generate_synthetic_scene(cfg.synthetic, cfg.output_dir);
  print_json({{"frames", manifest.frames.size()},
              {"transforms", (cfg.output_dir / "transforms.json").generic_string()},
              {"analytic_field", (cfg.output_dir / "analytic_field.json").generic_string()}});
  return 0;
}

int cmd_pipeline(const Globals& g) {
  const auto cfg = resolve_config(g);
  const json report = pipeline::run_pipeline(cfg);
  json summary = {{"report", (cfg.output_dir / "report.json").generic_string()}};
  if (report.contains("held_out_psnr")) summary["held_out_psnr"] = report["held_out_psnr"];
  if (report.contains("held_out_ssim")) summary["held_out_ssim"] = report["held_out_ssim"];
  print_json(summary);
  return 0;
}

int exit_code_for(ErrorKind kind) { return kind == ErrorKind::NonFinite ? kExitNumeric : kExitInput; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scattering-medium scene reconstruction: frame enhancement, keyframe selection, "
               "hash-grid radiance field training, rendering and image-quality metrics."};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "JSON configuration (flat dotted keys or nested objects)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_flag("--deterministic", g.deterministic, "Single thread, no occupancy grid; bitwise reproducible");
  app.add_option("--out", g.out, "Output directory (default: the config's output, else out)");

  auto* enhance_cmd = app.add_subcommand(
      "enhance",
      "Enhance frames: CLAHE on luminance, statistical color correction, Bayesian Retinex and gamma "
      "recomposition. Color correction divides by the channel standard deviation (V_c), not the variance.");
  std::vector<std::string> enhance_inputs;
  enhance_cmd->add_option("inputs", enhance_inputs, "Image files or directories")->required();

  auto* keyframes_cmd = app.add_subcommand("keyframes", "Score frames by sharpness and pose novelty, select keyframes");
  std::string kf_manifest, kf_colmap, kf_colmap_images;
  keyframes_cmd->add_option("--manifest", kf_manifest, "transforms.json with frame poses");
  keyframes_cmd->add_option("--colmap", kf_colmap, "Directory with COLMAP cameras.txt and images.txt");
  keyframes_cmd->add_option("--images", kf_colmap_images, "Image directory for --colmap");

  auto* train_cmd = app.add_subcommand("train", "Train a radiance field on every frame of a manifest");
  std::string train_manifest;
  std::optional<int> train_steps;
  train_cmd->add_option("--manifest", train_manifest, "transforms.json (e.g. keyframes.json)")->required();
  train_cmd->add_option("--steps", train_steps, "Override train.steps");

  auto* render_cmd = app.add_subcommand("render", "Render the poses of a manifest from a checkpoint");
  std::string render_ckpt, render_manifest;
  std::vector<int> render_frames;
  render_cmd->add_option("--checkpoint", render_ckpt, "Checkpoint file")->required();
  render_cmd->add_option("--manifest", render_manifest, "transforms.json with the poses to render")->required();
  render_cmd->add_option("--frames", render_frames, "Only these frame ids");

  auto* metrics_cmd = app.add_subcommand("metrics", "PSNR/SSIM against references, UCIQE/UIQM always");
  std::vector<std::string> metrics_pred, metrics_ref;
  metrics_cmd->add_option("--pred", metrics_pred, "Images or directories to score")->required();
  metrics_cmd->add_option("--ref", metrics_ref, "Reference images or directories, paired in order");

  auto* synth_cmd = app.add_subcommand("synthesize", "Write the built-in sphere scene (images + transforms)");
  std::optional<int> synth_views, synth_size;
  synth_cmd->add_option("--views", synth_views, "Number of views");
  synth_cmd->add_option("--size", synth_size, "Square image size in pixels");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run enhance, keyframes, train, render and metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*enhance_cmd) return cmd_enhance(g, enhance_inputs);
    if (*keyframes_cmd) return cmd_keyframes(g, kf_manifest, kf_colmap, kf_colmap_images);
    if (*train_cmd) return cmd_train(g, train_manifest, train_steps);
    if (*render_cmd) return cmd_render(g, render_ckpt, render_manifest, render_frames);
    if (*metrics_cmd) return cmd_metrics(g, metrics_pred, metrics_ref);
    if (*synth_cmd) return cmd_synthesize(g, synth_views, synth_size);
    if (*pipeline_cmd) return cmd_pipeline(g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
