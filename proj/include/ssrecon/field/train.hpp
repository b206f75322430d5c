#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ssrecon/camera.hpp"
#include "ssrecon/field/field.hpp"
#include "ssrecon/field/render.hpp"
#include "ssrecon/image.hpp"

namespace ssrecon::field {

struct TrainConfig {
  double learning_rate = 1e-2;
  /// Learning rate multiplier applied after each third of `steps`.
  double decay_factor = 0.33;
  int rays_per_batch = 4096;
  int samples_per_ray = 128;
  int steps = 5000;
  std::uint64_t seed = 0;
  /// Plain W <- W - lr * grad instead of Adam.
  bool sgd = false;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-15;
  int threads = 1;
  bool occupancy = false;
  int occupancy_interval = 256;
  double occupancy_threshold = 0.01;
  int occupancy_resolution = 32;

  void validate() const;
  double learning_rate_at(int step) const;
};

/// One training ray with its fixed sample positions and target color. Rays
/// that miss the scene cube have `hit == false` and predict black.
struct BatchRay {
  Ray ray;
  bool hit = true;
  Rgb target = Rgb::Zero();
  std::vector<double> t;
};

using RayBatch = std::vector<BatchRay>;

/// Mean over rays of the squared L2 color error.
double photometric_loss(std::span<const Rgb> predicted, std::span<const Rgb> reference);

template <typename T>
struct BatchResult {
  double loss = 0.0;
  std::vector<Rgb> predictions;
  /// Same layout as the parameter vector; empty for forward-only calls.
  std::vector<T> gradient;
};

/// Renders every ray of the batch and evaluates the photometric loss.
template <typename T>
BatchResult<T> forward_batch(const FieldParamsT<T>& params, const RayBatch& batch,
                             const OccupancyGrid* occupancy = nullptr);

/// Loss and its exact gradient with respect to every parameter, by
/// reverse-mode differentiation of loss(render(field(encoding))). Work is
/// split over `threads` contiguous ray chunks, each with its own gradient
/// buffer, summed in chunk order.
template <typename T>
BatchResult<T> backward(const FieldParamsT<T>& params, const RayBatch& batch, int threads = 1,
                        const OccupancyGrid* occupancy = nullptr);

template <typename T>
class Sgd {
 public:
  void step(std::span<T> params, std::span<const T> grad, double lr) const;
};

template <typename T>
class Adam {
 public:
  Adam(std::size_t size, double beta1, double beta2, double epsilon);
  void step(std::span<T> params, std::span<const T> grad, double lr);
  int steps() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainState {
  explicit TrainState(FieldParams p, const TrainConfig& cfg);

  FieldParams params;
  std::optional<Adam<float>> adam;
  int step = 0;
};

/// One update W <- W - lr * grad (or its Adam counterpart). Returns the loss
/// before the update. Throws Error(NonFinite) and leaves the state untouched
/// when the loss or gradient is not finite.
double train_step(TrainState& state, const RayBatch& batch, const TrainConfig& cfg,
                  const OccupancyGrid* occupancy = nullptr);

struct TrainingView {
  CameraPose pose;
  Intrinsics intrinsics;
  ImageF image;
};

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  double psnr_train = 0.0;
  double elapsed_s = 0.0;
};

/// Pixel-level training loop over a set of posed views.
class Trainer {
 public:
  Trainer(const FieldConfig& field_cfg, const TrainConfig& cfg, std::span<const TrainingView> views);
  Trainer(FieldParams initial, const TrainConfig& cfg, std::span<const TrainingView> views);

  /// Batch for the current step; a pure function of (seed, step).
  RayBatch make_batch() const;
  double step();
  /// Runs until cfg.steps; `on_step` sees every step.
  void run(const std::function<void(const StepRecord&)>& on_step = {});

  const TrainState& state() const { return state_; }
  const FieldParams& params() const { return state_.params; }
  const OccupancyGrid* occupancy() const { return occupancy_ ? &*occupancy_ : nullptr; }
  std::size_t ray_count() const { return rays_.size(); }

 private:
  struct PixelRay {
    std::optional<Ray> ray;
    Rgb color;
  };

  void prepare(std::span<const TrainingView> views);

  TrainConfig cfg_;
  TrainState state_;
  std::vector<PixelRay> rays_;
  std::optional<OccupancyGrid> occupancy_;
  std::chrono::steady_clock::time_point start_;
};

inline double loss_to_psnr(double loss) {
  // loss sums three channels; per-sample MSE is loss / 3.
  if (loss <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(3.0 / loss));
}

}  // namespace ssrecon::field
