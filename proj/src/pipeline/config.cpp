#include <fstream>
#include <functional>
#include <thread>

#include "ssrecon/error.hpp"
#include "ssrecon/pipeline/config.hpp"

namespace ssrecon::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(enhance::Stage stage) {
  switch (stage) {
    case enhance::Stage::Clahe: return "clahe";
    case enhance::Stage::ColorCorrect: return "color_correct";
    case enhance::Stage::Retinex: return "retinex";
  }
  return "unknown";
}

enhance::Stage stage_from_string(const std::string& name) {
  if (name == "clahe") return enhance::Stage::Clahe;
  if (name == "color_correct") return enhance::Stage::ColorCorrect;
  if (name == "retinex") return enhance::Stage::Retinex;
  throw Error(ErrorKind::Config, "unknown enhancement stage '" + name + "'");
}

namespace {

std::string format_name(InputFormat f) {
  switch (f) {
    case InputFormat::Synthetic: return "synthetic";
    case InputFormat::Transforms: return "transforms";
    case InputFormat::Colmap: return "colmap";
  }
  return "unknown";
}

InputFormat format_from(const std::string& name) {
  if (name == "synthetic") return InputFormat::Synthetic;
  if (name == "transforms") return InputFormat::Transforms;
  if (name == "colmap") return InputFormat::Colmap;
  throw Error(ErrorKind::Config, "unknown input_format '" + name + "'");
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw Error(ErrorKind::Config, "'" + key + "' must be " + expected);
}

template <typename V>
V convert(const json& v, const std::string& key) {
  if constexpr (std::is_same_v<V, bool>) {
    if (!v.is_boolean()) type_error(key, "a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<V, std::uint64_t>) {
    if (!v.is_number_unsigned()) type_error(key, "a non-negative integer");
    return v.get<std::uint64_t>();
  } else if constexpr (std::is_integral_v<V>) {
    if (!v.is_number_integer()) type_error(key, "an integer");
    return v.get<V>();
  } else if constexpr (std::is_floating_point_v<V>) {
    if (!v.is_number()) type_error(key, "a number");
    return v.get<V>();
  } else if constexpr (std::is_same_v<V, fs::path>) {
    if (!v.is_string()) type_error(key, "a path string");
    return fs::path(v.get<std::string>());
  } else {
    if (!v.is_string()) type_error(key, "a string");
    return v.get<std::string>();
  }
}

template <typename V>
json to_value(const V& v) {
  if constexpr (std::is_same_v<V, fs::path>) {
    return v.generic_string();
  } else {
    return v;
  }
}

/// Reads (value == nullptr) or writes one setting; always returns the
/// resulting value.
using Accessor = std::function<json(PipelineConfig&, const json*)>;

struct Entry {
  std::string key;
  Accessor access;
  bool emitted = true;
};

template <typename V, typename Ref>
Entry bind(std::string key, Ref ref) {
  return {key, [key, ref](PipelineConfig& c, const json* v) -> json {
            V& slot = ref(c);
            if (v) slot = convert<V>(*v, key);
            return to_value(slot);
          }};
}

#define SSRECON_BIND(type, key, member) bind<type>(key, [](PipelineConfig& c) -> type& { return c.member; })

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t{
        SSRECON_BIND(bool, "stages.enhance", stages.enhance),
        SSRECON_BIND(bool, "stages.keyframes", stages.keyframes),
        SSRECON_BIND(bool, "stages.train", stages.train),
        SSRECON_BIND(bool, "stages.render", stages.render),
        SSRECON_BIND(bool, "stages.metrics", stages.metrics),
        SSRECON_BIND(double, "mu", enhance.mu),
        SSRECON_BIND(int, "clahe.tiles_x", enhance.clahe.tiles_x),
        SSRECON_BIND(int, "clahe.tiles_y", enhance.clahe.tiles_y),
        SSRECON_BIND(double, "clahe.clip_limit", enhance.clahe.clip_limit),
        SSRECON_BIND(int, "clahe.bins", enhance.clahe.bins),
        SSRECON_BIND(double, "retinex.alpha", enhance.retinex.smooth_grad_weight),
        SSRECON_BIND(double, "retinex.beta", enhance.retinex.smooth_lap_weight),
        SSRECON_BIND(double, "retinex.gamma1", enhance.retinex.reflect_grad_weight),
        SSRECON_BIND(double, "retinex.gamma2", enhance.retinex.reflect_lap_weight),
        SSRECON_BIND(int, "retinex.iterations", enhance.retinex.iterations),
        SSRECON_BIND(double, "retinex.gamma", enhance.retinex.gamma),
        SSRECON_BIND(double, "retinex.white_level", enhance.retinex.white_level),
        SSRECON_BIND(double, "keyframe.w1", selection.w1),
        SSRECON_BIND(double, "keyframe.w2", selection.w2),
        SSRECON_BIND(int, "keyframe.window", selection.window),
        SSRECON_BIND(int, "keyframe.keep", selection.keep_per_window),
        SSRECON_BIND(int, "grid.levels", field.grid.levels),
        SSRECON_BIND(int, "grid.features_per_level", field.grid.features_per_level),
        SSRECON_BIND(int, "grid.table_size_log2", field.grid.table_size_log2),
        SSRECON_BIND(int, "grid.base_resolution", field.grid.base_resolution),
        SSRECON_BIND(double, "grid.growth_factor", field.grid.growth_factor),
        SSRECON_BIND(int, "mlp.hidden_width", field.mlp.hidden_width),
        SSRECON_BIND(int, "mlp.hidden_layers", field.mlp.hidden_layers),
        SSRECON_BIND(int, "mlp.geo_features", field.mlp.geo_features),
        SSRECON_BIND(int, "mlp.direction_order", field.mlp.direction_order),
        SSRECON_BIND(double, "train.learning_rate", train.learning_rate),
        SSRECON_BIND(double, "train.decay_factor", train.decay_factor),
        SSRECON_BIND(int, "train.rays_per_batch", train.rays_per_batch),
        SSRECON_BIND(int, "train.samples_per_ray", train.samples_per_ray),
        SSRECON_BIND(int, "train.steps", train.steps),
        SSRECON_BIND(bool, "train.sgd", train.sgd),
        SSRECON_BIND(bool, "train.occupancy", train.occupancy),
        SSRECON_BIND(int, "train.occupancy_interval", train.occupancy_interval),
        SSRECON_BIND(double, "train.occupancy_threshold", train.occupancy_threshold),
        SSRECON_BIND(int, "train.occupancy_resolution", train.occupancy_resolution),
        SSRECON_BIND(double, "ssim.k1", ssim.k1),
        SSRECON_BIND(double, "ssim.k2", ssim.k2),
        SSRECON_BIND(int, "ssim.window", ssim.window),
        SSRECON_BIND(double, "ssim.sigma", ssim.sigma),
        SSRECON_BIND(fs::path, "input", input),
        SSRECON_BIND(fs::path, "colmap_images", colmap_images),
        SSRECON_BIND(std::string, "synthetic.scene", synthetic.scene),
        SSRECON_BIND(int, "synthetic.views", synthetic.views),
        SSRECON_BIND(int, "synthetic.width", synthetic.width),
        SSRECON_BIND(int, "synthetic.height", synthetic.height),
        SSRECON_BIND(double, "synthetic.focal", synthetic.focal),
        SSRECON_BIND(double, "synthetic.camera_distance", synthetic.camera_distance),
        SSRECON_BIND(int, "synthetic.render_samples", synthetic.render_samples),
        SSRECON_BIND(double, "synthetic.medium_density", synthetic.sphere.medium_density),
        SSRECON_BIND(double, "scene_bound", scene_bound),
        SSRECON_BIND(fs::path, "checkpoint", checkpoint),
        SSRECON_BIND(int, "render.samples", render_samples),
        SSRECON_BIND(int, "holdout_every", holdout_every),
        SSRECON_BIND(int, "threads", threads),
        SSRECON_BIND(bool, "deterministic", deterministic),
        SSRECON_BIND(std::uint64_t, "seed", seed),
    };
    t.push_back({"input_format", [](PipelineConfig& c, const json* v) -> json {
                   if (v) c.input_format = format_from(convert<std::string>(*v, "input_format"));
                   return format_name(c.input_format);
                 }});
    t.push_back({"order", [](PipelineConfig& c, const json* v) -> json {
                   if (v) {
                     if (!v->is_array()) type_error("order", "an array of stage names");
                     std::vector<enhance::Stage> order;
                     for (const json& s : *v) order.push_back(stage_from_string(convert<std::string>(s, "order")));
                     c.enhance.order = std::move(order);
                   }
                   json out = json::array();
                   for (auto s : c.enhance.order) out.push_back(to_string(s));
                   return out;
                 }});
    // Shorthand for a square tile grid (or an [x, y] pair); write-only.
    t.push_back({"clahe.tiles",
                 [](PipelineConfig& c, const json* v) -> json {
                   if (v) {
                     if (v->is_array() && v->size() == 2) {
                       c.enhance.clahe.tiles_x = convert<int>((*v)[0], "clahe.tiles");
                       c.enhance.clahe.tiles_y = convert<int>((*v)[1], "clahe.tiles");
                     } else {
                       c.enhance.clahe.tiles_x = c.enhance.clahe.tiles_y = convert<int>(*v, "clahe.tiles");
                     }
                   }
                   return json::array({c.enhance.clahe.tiles_x, c.enhance.clahe.tiles_y});
                 },
                 false});
    t.push_back(SSRECON_BIND(fs::path, "output", output_dir));
    t.back().emitted = false;
    return t;
  }();
  return table;
}

#undef SSRECON_BIND

void flatten_into(const json& node, const std::string& prefix, json& out) {
  if (node.is_object() && (prefix.empty() || !node.empty())) {
    for (const auto& [k, v] : node.items()) flatten_into(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out[prefix] = node;
  }
}

}  // namespace

void PipelineConfig::validate() const {
  enhance.validate();
  selection.validate();
  field.validate();
  train.validate();
  ssim.validate();
  if (input_format == InputFormat::Synthetic) {
    synthetic.validate();
  } else if (input.empty()) {
    throw Error(ErrorKind::Config, "input is required for input_format " + format_name(input_format));
  }
  if (scene_bound < 0.0) throw Error(ErrorKind::Config, "scene_bound must be >= 0");
  if (render_samples < 1) throw Error(ErrorKind::Config, "render.samples must be >= 1");
  if (holdout_every < 0) throw Error(ErrorKind::Config, "holdout_every must be >= 0");
  if (threads < 0) throw Error(ErrorKind::Config, "threads must be >= 0");
  if (output_dir.empty()) throw Error(ErrorKind::Config, "output directory is empty");
}

int PipelineConfig::effective_threads() const {
  if (deterministic) return 1;
  if (threads > 0) return threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

json flatten(const json& tree) {
  if (!tree.is_object()) throw Error(ErrorKind::Config, "configuration must be a JSON object");
  json out = json::object();
  flatten_into(tree, "", out);
  return out;
}

void apply_config(PipelineConfig& cfg, const json& tree) {
  const json flat = flatten(tree);
  for (const auto& [key, value] : flat.items()) {
    const auto& table = entries();
    const auto it = std::ranges::find(table, key, &Entry::key);
    if (it == table.end()) throw Error(ErrorKind::Config, "unknown configuration key '" + key + "'");
    it->access(cfg, &value);
  }
}

PipelineConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Config, "cannot open configuration " + file.string());
  json tree;
  try {
    tree = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, file.string() + ": " + e.what());
  }
  PipelineConfig cfg;
  apply_config(cfg, tree);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw e.with_context(file.string());
  }
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  json out = json::object();
  for (const Entry& e : entries()) {
    if (e.emitted) out[e.key] = e.access(copy, nullptr);
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : entries()) keys.push_back(e.key);
  return keys;
}

}  // namespace ssrecon::pipeline
