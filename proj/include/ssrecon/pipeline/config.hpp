#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssrecon/enhance.hpp"
#include "ssrecon/field/field.hpp"
#include "ssrecon/field/train.hpp"
#include "ssrecon/keyframe.hpp"
#include "ssrecon/metrics.hpp"
#include "ssrecon/pipeline/synthetic.hpp"

namespace ssrecon::pipeline {

struct StageToggles {
  bool enhance = true;
  bool keyframes = true;
  bool train = true;
  bool render = true;
  bool metrics = true;

  bool any() const { return enhance || keyframes || train || render || metrics; }
};

enum class InputFormat { Synthetic, Transforms, Colmap };

struct PipelineConfig {
  StageToggles stages;
  enhance::EnhanceConfig enhance;
  keyframe::SelectionConfig selection;
  field::FieldConfig field;
  field::TrainConfig train;
  metrics::SsimConfig ssim;

  InputFormat input_format = InputFormat::Synthetic;
  /// transforms.json, or a directory holding cameras.txt and images.txt.
  std::filesystem::path input;
  /// Image directory for COLMAP input; defaults to the model directory.
  std::filesystem::path colmap_images;
  SyntheticSpec synthetic;
  /// Overrides the manifest's scene bound when positive.
  double scene_bound = 0.0;
  /// Parameters for the render stage when training is disabled.
  std::filesystem::path checkpoint;

  int render_samples = 128;
  /// Every n-th keyframe (index 0, n, 2n, ...) is held out; 0 keeps all.
  int holdout_every = 8;
  /// 0 = all hardware threads.
  int threads = 0;
  bool deterministic = false;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  void validate() const;
  /// Thread count after applying deterministic mode.
  int effective_threads() const;
};

/// Nested objects become dotted keys: {"clahe": {"clip_limit": 0.02}} and
/// {"clahe.clip_limit": 0.02} are equivalent. Arrays are leaves.
nlohmann::json flatten(const nlohmann::json& tree);

/// Applies every key of `tree` to `cfg`. Unknown keys and wrongly typed
/// values raise Error(Config).
void apply_config(PipelineConfig& cfg, const nlohmann::json& tree);
PipelineConfig load_config(const std::filesystem::path& file);

/// Flat key -> value view of every setting except the output directory.
nlohmann::json config_to_json(const PipelineConfig& cfg);

/// Documented keys, in the order config_to_json emits them.
std::vector<std::string> config_keys();

std::string to_string(enhance::Stage stage);
enhance::Stage stage_from_string(const std::string& name);

}  // namespace ssrecon::pipeline
