#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>

#include "ssrecon/error.hpp"
#include "ssrecon/field/checkpoint.hpp"
#include "ssrecon/field/render.hpp"
#include "ssrecon/image.hpp"
#include "ssrecon/pipeline/pipeline.hpp"

namespace ssrecon::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  return fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal()).generic_string();
}

std::string output_name(const keyframe::FrameRecord& f) {
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%05d_", f.frame_id);
  return prefix + fs::path(f.image_path).stem().string() + ".png";
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + file.string());
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::ranges::sort(v);
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs one stage body, records its wall time and tags errors with its name.
template <typename Body>
json run_stage(const char* name, Body&& body) {
  const auto start = Clock::now();
  json stage = {{"name", name}};
  try {
    body(stage);
  } catch (const Error& e) {
    throw e.with_context(std::string("stage ") + name);
  }
  stage["elapsed_s"] = seconds_since(start);
  return stage;
}

}  // namespace

SceneManifest load_manifest(const PipelineConfig& cfg, const fs::path& scene_dir) {
  SceneManifest manifest;
  switch (cfg.input_format) {
    case InputFormat::Synthetic: {
      SyntheticSpec spec = cfg.synthetic;
      if (cfg.scene_bound > 0.0) spec.scene_bound = cfg.scene_bound;
      manifest = generate_synthetic_scene(spec, scene_dir);
      break;
    }
    case InputFormat::Transforms:
      manifest = parse_transforms(cfg.input);
      break;
    case InputFormat::Colmap:
      manifest = parse_colmap_text(cfg.input / "cameras.txt", cfg.input / "images.txt", cfg.colmap_images);
      break;
  }
  if (cfg.scene_bound > 0.0) manifest.scene_bound = cfg.scene_bound;
  return manifest;
}

std::vector<field::TrainingView> load_views(const SceneManifest& manifest,
                                            std::span<const keyframe::FrameRecord> frames) {
  std::vector<field::TrainingView> views;
  for (const auto& f : frames) {
    if (!f.pose) throw Error(ErrorKind::MissingPose, "frame " + std::to_string(f.frame_id) + " has no pose");
    views.push_back({*f.pose, manifest.intrinsics, read_image(f.image_path)});
  }
  return views;
}

TrainOutcome train_field(std::span<const field::TrainingView> views, const field::FieldConfig& field_cfg,
                         const field::TrainConfig& train_cfg, const fs::path& log_file, const fs::path& checkpoint) {
  if (views.empty()) throw Error(ErrorKind::Config, "no training views");
  if (log_file.has_parent_path()) fs::create_directories(log_file.parent_path());
  std::ofstream log(log_file);
  if (!log) throw Error(ErrorKind::Io, "cannot write " + log_file.string());

  field::Trainer trainer(field_cfg, train_cfg, views);
  TrainOutcome outcome{trainer.params(), 0, 0.0};
  const auto start = Clock::now();
  while (trainer.state().step < train_cfg.steps) {
    double loss = 0.0;
    try {
      loss = trainer.step();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NonFinite) field::save_checkpoint(checkpoint, trainer.params());
      throw e.with_context("training step " + std::to_string(trainer.state().step));
    }
    const json line = {{"step", trainer.state().step},
                       {"loss", loss},
                       {"psnr_train", field::loss_to_psnr(loss)},
                       {"elapsed_s", seconds_since(start)}};
    log << line.dump() << '\n';
    outcome.final_loss = loss;
  }
  outcome.params = trainer.params();
  outcome.steps = trainer.state().step;
  field::save_checkpoint(checkpoint, outcome.params);
  return outcome;
}

json evaluate_frames(std::span<const EvaluatedFrame> frames, const metrics::SsimConfig& ssim_cfg) {
  json rows = json::array();
  std::map<std::string, std::vector<double>> columns;
  for (const auto& f : frames) {
    json row = {{"frame_id", f.frame_id}};
    if (f.reference) {
      const double p = metrics::psnr(f.prediction, *f.reference);
      const double s = metrics::ssim(f.prediction, *f.reference, ssim_cfg);
      row["psnr"] = p;
      row["ssim"] = s;
      columns["psnr"].push_back(p);
      columns["ssim"].push_back(s);
    } else {
      row["psnr"] = nullptr;
      row["ssim"] = nullptr;
    }
    const double c = metrics::uciqe(f.prediction);
    const double q = metrics::uiqm(f.prediction);
    row["uciqe"] = c;
    row["uiqm"] = q;
    columns["uciqe"].push_back(c);
    columns["uiqm"].push_back(q);
    rows.push_back(std::move(row));
  }
  json aggregates = json::object();
  for (const auto& [name, values] : columns) {
    aggregates[name] = {{"mean", mean_of(values)}, {"median", median_of(values)}, {"count", values.size()}};
  }
  const json metadata = {{"color_space", metrics::kUciqeColorSpace},
                         {"psnr_cap_db", metrics::kPsnrCap},
                         {"ssim", {{"window", ssim_cfg.window}, {"sigma", ssim_cfg.sigma}, {"k1", ssim_cfg.k1},
                                   {"k2", ssim_cfg.k2}, {"channel", "luminance"}}},
                         {"uiqm_scale", "0-255"}};
  return {{"frames", rows}, {"aggregates", aggregates}, {"metadata", metadata}};
}

json strip_timing(const json& report) {
  if (report.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : report.items()) {
      if (k != "elapsed_s") out[k] = strip_timing(v);
    }
    return out;
  }
  if (report.is_array()) {
    json out = json::array();
    for (const auto& v : report) out.push_back(strip_timing(v));
    return out;
  }
  return report;
}

json run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  const auto start = Clock::now();
  json report = {{"config", config_to_json(cfg)}, {"stages", json::array()}};

  if (!cfg.stages.any()) {
    report["elapsed_s"] = seconds_since(start);
    write_json(out / "report.json", report);
    return report;
  }

  SceneManifest manifest;
  try {
    manifest = load_manifest(cfg, out / "scene");
    verify_images(manifest);
  } catch (const Error& e) {
    throw e.with_context("input");
  }
  report["input"] = {{"source", to_string(manifest.source)},
                     {"frames", manifest.frames.size()},
                     {"width", manifest.intrinsics.width},
                     {"height", manifest.intrinsics.height},
                     {"scene_bound", manifest.scene_bound},
                     {"warnings", manifest.warnings}};

  // Current image of every frame, replaced by later stages.
  std::map<int, ImageF> images;
  for (const auto& f : manifest.frames) images.emplace(f.frame_id, read_image(f.image_path));
  std::vector<keyframe::FrameRecord> frames = manifest.frames;

  if (cfg.stages.enhance) {
    report["stages"].push_back(run_stage("enhance", [&](json& stage) {
      cfg.enhance.validate();
      std::vector<double> uciqe_before, uciqe_after, uiqm_before, uiqm_after;
      json zero_spread = json::array();
      for (auto& f : frames) {
        ImageF& img = images.at(f.frame_id);
        uciqe_before.push_back(metrics::uciqe(img));
        uiqm_before.push_back(metrics::uiqm(img));
        enhance::EnhanceResult r = enhance::enhance_frame(img, cfg.enhance);
        if (r.zero_spread) zero_spread.push_back(f.frame_id);
        const fs::path path = out / "enhanced" / output_name(f);
        write_image(path, r.image, 8);
        // Downstream stages see exactly what was written.
        img = read_image(path);
        f.image_path = fs::absolute(path).lexically_normal().string();
        uciqe_after.push_back(metrics::uciqe(img));
        uiqm_after.push_back(metrics::uiqm(img));
      }
      stage["directory"] = "enhanced";
      stage["frames"] = frames.size();
      stage["zero_spread_frames"] = zero_spread;
      stage["uciqe_before"] = mean_of(uciqe_before);
      stage["uciqe_after"] = mean_of(uciqe_after);
      stage["uiqm_before"] = mean_of(uiqm_before);
      stage["uiqm_after"] = mean_of(uiqm_after);
    }));
  }

  if (cfg.stages.keyframes) {
    report["stages"].push_back(run_stage("keyframes", [&](json& stage) {
      for (auto& f : frames) f.sharpness = keyframe::sharpness(images.at(f.frame_id));
      frames = keyframe::select_keyframes(frames, cfg.selection);
      SceneManifest selected = manifest;
      selected.frames = frames;
      write_transforms(out / "keyframes.json", selected);
      json ids = json::array();
      for (const auto& f : frames) ids.push_back(f.frame_id);
      stage["manifest"] = "keyframes.json";
      stage["selected"] = ids;
    }));
  }

  std::vector<keyframe::FrameRecord> training, held_out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const bool hold = cfg.holdout_every > 0 && i % static_cast<std::size_t>(cfg.holdout_every) == 0;
    (hold ? held_out : training).push_back(frames[i]);
  }
  auto ids_of = [](const std::vector<keyframe::FrameRecord>& v) {
    json ids = json::array();
    for (const auto& f : v) ids.push_back(f.frame_id);
    return ids;
  };
  report["split"] = {{"training", ids_of(training)}, {"held_out", ids_of(held_out)}};

  field::FieldConfig field_cfg = cfg.field;
  field_cfg.grid.scene_bound = manifest.scene_bound;
  std::optional<field::FieldParams> params;

  if (cfg.stages.train) {
    report["stages"].push_back(run_stage("train", [&](json& stage) {
      field::TrainConfig tc = cfg.train;
      tc.seed = cfg.seed;
      tc.threads = cfg.effective_threads();
      if (cfg.deterministic) tc.occupancy = false;
      std::vector<field::TrainingView> views;
      for (const auto& f : training) views.push_back({*f.pose, manifest.intrinsics, images.at(f.frame_id)});
      TrainOutcome result = train_field(views, field_cfg, tc, out / "train_log.jsonl", out / "checkpoint.ssck");
      stage["steps"] = result.steps;
      stage["final_loss"] = result.final_loss;
      stage["final_psnr_train"] = field::loss_to_psnr(result.final_loss);
      stage["checkpoint"] = "checkpoint.ssck";
      stage["log"] = "train_log.jsonl";
      params = std::move(result.params);
    }));
  }

  std::map<int, ImageF> renders;
  if (cfg.stages.render) {
    report["stages"].push_back(run_stage("render", [&](json& stage) {
      if (!params) {
        if (cfg.checkpoint.empty()) throw Error(ErrorKind::Config, "render needs training or a checkpoint");
        params = field::load_checkpoint(cfg.checkpoint);
      }
      const field::NeuralField source(*params);
      field::RenderConfig rc;
      rc.samples_per_ray = cfg.render_samples;
      rc.scene_bound = params->config().grid.scene_bound;
      rc.threads = cfg.effective_threads();
      json views = json::array();
      for (const auto& f : held_out) {
        ImageF img = field::render_view(*f.pose, manifest.intrinsics, source, rc);
        const fs::path path = out / "renders" / output_name(f);
        write_image(path, img, 16);
        views.push_back({{"frame_id", f.frame_id}, {"path", relative_to(path, out)}});
        renders.emplace(f.frame_id, std::move(img));
      }
      stage["views"] = views;
    }));
  }

  if (cfg.stages.metrics) {
    report["stages"].push_back(run_stage("metrics", [&](json& stage) {
      std::vector<EvaluatedFrame> evaluated;
      for (const auto& f : held_out) {
        const auto it = renders.find(f.frame_id);
        if (it != renders.end()) evaluated.push_back({f.frame_id, it->second, images.at(f.frame_id)});
      }
      stage["held_out"] = evaluate_frames(evaluated, cfg.ssim);
      if (!evaluated.empty()) {
        const json& agg = stage["held_out"]["aggregates"];
        report["held_out_psnr"] = agg["psnr"]["mean"];
        report["held_out_ssim"] = agg["ssim"]["mean"];
      }
    }));
  }

  report["elapsed_s"] = seconds_since(start);
  write_json(out / "report.json", report);
  return report;
}

}  // namespace ssrecon::pipeline
