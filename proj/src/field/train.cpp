#include <algorithm>
#include <cmath>

#include "ssrecon/error.hpp"
#include "ssrecon/field/train.hpp"
#include "ssrecon/parallel.hpp"

namespace ssrecon::field {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning_rate must be positive");
  if (!(decay_factor > 0.0)) throw Error(ErrorKind::Config, "decay_factor must be positive");
  if (rays_per_batch < 1 || samples_per_ray < 1 || steps < 0) {
    throw Error(ErrorKind::Config, "rays_per_batch and samples_per_ray must be >= 1");
  }
  if (occupancy_interval < 1 || occupancy_resolution < 1) throw Error(ErrorKind::Config, "invalid occupancy settings");
}

double TrainConfig::learning_rate_at(int step) const {
  if (steps <= 0) return learning_rate;
  const int phase = std::min(2, static_cast<int>(3LL * step / steps));
  return learning_rate * std::pow(decay_factor, phase);
}

double photometric_loss(std::span<const Rgb> predicted, std::span<const Rgb> reference) {
  if (predicted.size() != reference.size()) throw Error(ErrorKind::ShapeMismatch, "batch sizes differ");
  if (predicted.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += (predicted[i] - reference[i]).squaredNorm();
  return sum / static_cast<double>(predicted.size());
}

namespace {

template <typename T>
struct RayScratch {
  NetworkPass<T> pass;
  std::vector<Vec3> points;
  std::vector<T> deltas;
  std::vector<T> weights;
  std::vector<T> trans_after;  // T_{i+1}
  std::vector<T> d_density;
  typename NetworkPass<T>::Matrix d_color;
};

// Renders one ray; when `grad` is non-empty, also accumulates
// d(loss_scale * |C - target|^2)/d(params) into it.
template <typename T>
Rgb trace_ray(const FieldParamsT<T>& params, const BatchRay& br, const OccupancyGrid* occupancy, RayScratch<T>& s,
              double loss_scale, std::span<T> grad) {
  if (!br.hit || br.t.empty()) return Rgb::Zero();
  const std::vector<double> all_deltas = sample_deltas(br.ray, br.t);
  s.points.clear();
  s.deltas.clear();
  for (std::size_t i = 0; i < br.t.size(); ++i) {
    const Vec3 p = br.ray.at(br.t[i]);
    if (occupancy && !occupancy->occupied(p)) continue;
    s.points.push_back(p);
    s.deltas.push_back(static_cast<T>(all_deltas[i]));
  }
  if (s.points.empty()) return Rgb::Zero();

  s.pass.forward(params, s.points, br.ray.direction);
  const int n = s.pass.size();
  s.weights.resize(n);
  s.trans_after.resize(n);
  T trans = T(1);
  Eigen::Matrix<T, 3, 1> color = Eigen::Matrix<T, 3, 1>::Zero();
  for (int i = 0; i < n; ++i) {
    const T attenuation = std::exp(-s.pass.density(i) * s.deltas[i]);
    s.weights[i] = trans * (T(1) - attenuation);
    for (int c = 0; c < 3; ++c) color[c] += s.weights[i] * s.pass.color(i, c);
    trans *= attenuation;
    s.trans_after[i] = trans;
  }
  const Rgb out = color.template cast<double>();
  if (grad.empty()) return out;

  Eigen::Matrix<T, 3, 1> g;
  for (int c = 0; c < 3; ++c) g[c] = static_cast<T>(2.0 * loss_scale) * (color[c] - static_cast<T>(br.target[c]));
  // dC/dsigma_i = delta_i * (T_{i+1} c_i - sum_{j>i} w_j c_j)
  s.d_density.assign(n, T(0));
  s.d_color.resize(n, 3);
  Eigen::Matrix<T, 3, 1> behind = Eigen::Matrix<T, 3, 1>::Zero();
  for (int i = n - 1; i >= 0; --i) {
    Eigen::Matrix<T, 3, 1> c_i(s.pass.color(i, 0), s.pass.color(i, 1), s.pass.color(i, 2));
    s.d_density[i] = s.deltas[i] * (s.trans_after[i] * g.dot(c_i) - g.dot(behind));
    for (int c = 0; c < 3; ++c) s.d_color(i, c) = s.weights[i] * g[c];
    behind += s.weights[i] * c_i;
  }
  s.pass.backward(params, s.d_density, s.d_color, grad);
  return out;
}

template <typename T>
BatchResult<T> run_batch(const FieldParamsT<T>& params, const RayBatch& batch, int threads,
                         const OccupancyGrid* occupancy, bool with_grad) {
  BatchResult<T> result;
  const int count = static_cast<int>(batch.size());
  result.predictions.assign(batch.size(), Rgb::Zero());
  if (count == 0) {
    if (with_grad) result.gradient.assign(params.values().size(), T(0));
    return result;
  }
  threads = std::max(1, std::min(threads, count));
  const double loss_scale = 1.0 / count;
  std::vector<std::vector<T>> grads(with_grad ? threads : 0);
  std::vector<double> losses(threads, 0.0);

  parallel_for(count, threads, [&](int begin, int end, int chunk) {
    RayScratch<T> scratch;
    std::span<T> grad;
    if (with_grad) {
      grads[chunk].assign(params.values().size(), T(0));
      grad = grads[chunk];
    }
    double loss = 0.0;
    for (int r = begin; r < end; ++r) {
      const Rgb c = trace_ray(params, batch[r], occupancy, scratch, loss_scale, grad);
      result.predictions[r] = c;
      loss += (c - batch[r].target).squaredNorm();
    }
    losses[chunk] = loss;
  });

  for (double l : losses) result.loss += l;
  result.loss *= loss_scale;
  if (with_grad) {
    result.gradient = std::move(grads[0]);
    for (int t = 1; t < threads; ++t) {
      for (std::size_t i = 0; i < result.gradient.size(); ++i) result.gradient[i] += grads[t][i];
    }
  }
  return result;
}

}  // namespace

template <typename T>
BatchResult<T> forward_batch(const FieldParamsT<T>& params, const RayBatch& batch, const OccupancyGrid* occupancy) {
  return run_batch(params, batch, 1, occupancy, false);
}

template <typename T>
BatchResult<T> backward(const FieldParamsT<T>& params, const RayBatch& batch, int threads,
                        const OccupancyGrid* occupancy) {
  if (batch.empty()) throw Error(ErrorKind::Config, "backward needs a non-empty batch");
  if (!params.all_finite()) throw Error(ErrorKind::NonFinite, "parameters contain non-finite values");
  BatchResult<T> result = run_batch(params, batch, threads, occupancy, true);
  const bool finite = std::isfinite(result.loss) &&
                      std::ranges::all_of(result.gradient, [](T v) { return std::isfinite(v); });
  if (!finite) throw Error(ErrorKind::NonFinite, "loss or gradient is not finite");
  return result;
}

template <typename T>
void Sgd<T>::step(std::span<T> params, std::span<const T> grad, double lr) const {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] = static_cast<T>(params[i] - lr * grad[i]);
}

template <typename T>
Adam<T>::Adam(std::size_t size, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

template <typename T>
void Adam<T>::step(std::span<T> params, std::span<const T> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double update = lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + epsilon_);
    params[i] = static_cast<T>(params[i] - update);
  }
}

template class Sgd<float>;
template class Sgd<double>;
template class Adam<float>;
template class Adam<double>;
template BatchResult<float> forward_batch(const FieldParamsT<float>&, const RayBatch&, const OccupancyGrid*);
template BatchResult<double> forward_batch(const FieldParamsT<double>&, const RayBatch&, const OccupancyGrid*);
template BatchResult<float> backward(const FieldParamsT<float>&, const RayBatch&, int, const OccupancyGrid*);
template BatchResult<double> backward(const FieldParamsT<double>&, const RayBatch&, int, const OccupancyGrid*);

TrainState::TrainState(FieldParams p, const TrainConfig& cfg) : params(std::move(p)) {
  if (!cfg.sgd) adam.emplace(params.values().size(), cfg.beta1, cfg.beta2, cfg.epsilon);
}

double train_step(TrainState& state, const RayBatch& batch, const TrainConfig& cfg, const OccupancyGrid* occupancy) {
  BatchResult<float> result = backward(state.params, batch, cfg.threads, occupancy);
  const double lr = cfg.learning_rate_at(state.step);
  if (state.adam) {
    state.adam->step(state.params.values(), result.gradient, lr);
  } else {
    Sgd<float>{}.step(state.params.values(), result.gradient, lr);
  }
  ++state.step;
  return result.loss;
}

Trainer::Trainer(const FieldConfig& field_cfg, const TrainConfig& cfg, std::span<const TrainingView> views)
    : Trainer(FieldParams::initialized(field_cfg, cfg.seed), cfg, views) {}

Trainer::Trainer(FieldParams initial, const TrainConfig& cfg, std::span<const TrainingView> views)
    : cfg_(cfg), state_(std::move(initial), cfg) {
  cfg_.validate();
  prepare(views);
  if (cfg_.occupancy) occupancy_.emplace(cfg_.occupancy_resolution, state_.params.config().grid.scene_bound);
}

void Trainer::prepare(std::span<const TrainingView> views) {
  const double bound = state_.params.config().grid.scene_bound;
  for (const TrainingView& v : views) {
    if (v.image.width() != v.intrinsics.width || v.image.height() != v.intrinsics.height) {
      throw Error(ErrorKind::ShapeMismatch, "training image does not match its intrinsics");
    }
    for (int y = 0; y < v.image.height(); ++y) {
      for (int x = 0; x < v.image.width(); ++x) {
        PixelRay pr;
        pr.ray = clip_to_cube(v.pose.translation, pixel_direction(v.pose, v.intrinsics, x, y), bound);
        pr.color = Rgb(v.image(x, y, 0), v.image(x, y, 1), v.image(x, y, 2));
        rays_.push_back(std::move(pr));
      }
    }
  }
  if (rays_.empty()) throw Error(ErrorKind::Config, "no training pixels");
}

RayBatch Trainer::make_batch() const {
  SampleRng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(state_.step)));
  RayBatch batch(static_cast<std::size_t>(cfg_.rays_per_batch));
  for (BatchRay& br : batch) {
    const auto idx = std::min(rays_.size() - 1, static_cast<std::size_t>(rng() * static_cast<double>(rays_.size())));
    const PixelRay& pr = rays_[idx];
    br.target = pr.color;
    br.hit = pr.ray.has_value();
    if (br.hit) {
      br.ray = *pr.ray;
      br.t = sample_ray(br.ray, cfg_.samples_per_ray, rng);
    }
  }
  return batch;
}

double Trainer::step() {
  const RayBatch batch = make_batch();
  const double loss = train_step(state_, batch, cfg_, occupancy());
  if (occupancy_ && state_.step % cfg_.occupancy_interval == 0) {
    occupancy_->update(NeuralField(state_.params), cfg_.occupancy_threshold);
  }
  return loss;
}

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  start_ = std::chrono::steady_clock::now();
  while (state_.step < cfg_.steps) {
    const double loss = step();
    if (on_step) {
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
      on_step({state_.step, loss, loss_to_psnr(loss), elapsed});
    }
  }
}

}  // namespace ssrecon::field
