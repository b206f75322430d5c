#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssrecon/field/train.hpp"
#include "ssrecon/pipeline/config.hpp"
#include "ssrecon/pipeline/manifest.hpp"

namespace ssrecon::pipeline {

/// Resolves cfg.input according to cfg.input_format. Synthetic scenes are
/// generated under `scene_dir`.
SceneManifest load_manifest(const PipelineConfig& cfg, const std::filesystem::path& scene_dir);

std::vector<field::TrainingView> load_views(const SceneManifest& manifest,
                                            std::span<const keyframe::FrameRecord> frames);

struct TrainOutcome {
  field::FieldParams params;
  int steps = 0;
  double final_loss = 0.0;
};

/// Runs the trainer, appending one JSON line {step, loss, psnr_train,
/// elapsed_s} per step to `log_file` and saving the final parameters to
/// `checkpoint`. On a non-finite step the last finite parameters are saved
/// before the error propagates.
TrainOutcome train_field(std::span<const field::TrainingView> views, const field::FieldConfig& field_cfg,
                         const field::TrainConfig& train_cfg, const std::filesystem::path& log_file,
                         const std::filesystem::path& checkpoint);

struct EvaluatedFrame {
  int frame_id = 0;
  ImageF prediction;
  /// Absent for no-reference scoring.
  std::optional<ImageF> reference;
};

/// {frames: [{frame_id, psnr, ssim, uciqe, uiqm}], aggregates: {mean, median}
/// per metric, metadata}. psnr/ssim are null without a reference.
nlohmann::json evaluate_frames(std::span<const EvaluatedFrame> frames, const metrics::SsimConfig& ssim_cfg);

/// Executes the enabled stages in the order enhance, keyframes, train,
/// render, metrics; writes report.json into cfg.output_dir and returns it.
/// Timings live only in fields named "elapsed_s".
nlohmann::json run_pipeline(const PipelineConfig& cfg);

/// Copy of `report` without any "elapsed_s" field.
nlohmann::json strip_timing(const nlohmann::json& report);

}  // namespace ssrecon::pipeline
