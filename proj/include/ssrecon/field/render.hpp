#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ssrecon/camera.hpp"
#include "ssrecon/field/field.hpp"
#include "ssrecon/image.hpp"

namespace ssrecon::field {

/// r(t) = origin + t * direction for t in [near, far].
struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double near = 0.0;
  double far = 1.0;

  Vec3 at(double t) const { return origin + t * direction; }
  bool valid() const;
};

/// Clips the ray to the cube [-bound, bound]^3; nullopt when it misses.
std::optional<Ray> clip_to_cube(const Vec3& origin, const Vec3& direction, double bound);

/// Ray through the center of pixel (px, py):
/// direction = normalize(R [(px + 0.5 - cx) / fx, (py + 0.5 - cy) / fy, 1]).
Vec3 pixel_direction(const CameraPose& pose, const Intrinsics& k, int px, int py);

/// splitmix64 finalizer, used to derive independent per-ray streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Small seeded generator of doubles in [0, 1).
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : state_(seed) {}
  double operator()();

 private:
  std::uint64_t state_;
};

/// Stratified sampling: the i-th of n samples is uniform in the i-th equal
/// sub-interval of [near, far]. `uniform` yields values in [0, 1).
template <typename Uniform>
std::vector<double> sample_ray(const Ray& ray, int n, Uniform&& uniform) {
  std::vector<double> t(static_cast<std::size_t>(n));
  const double length = ray.far - ray.near;
  for (int i = 0; i < n; ++i) t[i] = ray.near + (i + uniform()) * length / n;
  return t;
}

/// Stratum midpoints, the deterministic evaluation layout.
std::vector<double> sample_ray_midpoints(const Ray& ray, int n);

/// delta_i = t_{i+1} - t_i, with the last spacing running to the far bound.
std::vector<double> sample_deltas(const Ray& ray, std::span<const double> t);

/// T_i = exp(-sum_{j<i} sigma_j delta_j), computed as the running product
/// T_{i+1} = T_i exp(-sigma_i delta_i).
std::vector<double> transmittance(std::span<const double> densities, std::span<const double> deltas);

struct RaySamples {
  std::vector<double> t;
  std::vector<double> deltas;
  std::vector<double> densities;
  std::vector<Rgb> colors;
  std::vector<double> transmittances;
};

/// sum_i T_i (1 - exp(-sigma_i delta_i)) c_i
Rgb render_ray(const RaySamples& samples);

/// Anything that maps (points along one ray, direction) to density and color.
class RadianceSource {
 public:
  virtual ~RadianceSource() = default;
  virtual void evaluate(std::span<const Vec3> points, const Vec3& direction, std::span<double> density,
                        std::span<Rgb> color) const = 0;
};

/// The trainable hash-grid field.
class NeuralField final : public RadianceSource {
 public:
  explicit NeuralField(const FieldParams& params) : params_(params) {}
  void evaluate(std::span<const Vec3> points, const Vec3& direction, std::span<double> density,
                std::span<Rgb> color) const override;

 private:
  const FieldParams& params_;
};

/// Closed-form density and color functions.
class AnalyticField final : public RadianceSource {
 public:
  AnalyticField(std::function<double(const Vec3&)> density, std::function<Rgb(const Vec3&, const Vec3&)> color)
      : density_(std::move(density)), color_(std::move(color)) {}
  void evaluate(std::span<const Vec3> points, const Vec3& direction, std::span<double> density,
                std::span<Rgb> color) const override;

 private:
  std::function<double(const Vec3&)> density_;
  std::function<Rgb(const Vec3&, const Vec3&)> color_;
};

/// Coarse binary grid of cells that may hold density. Samples in empty
/// cells are skipped (treated as density 0).
class OccupancyGrid {
 public:
  OccupancyGrid(int resolution, double scene_bound);

  bool occupied(const Vec3& x) const;
  /// Re-marks every cell by thresholding the density at its center.
  void update(const RadianceSource& source, double threshold);
  std::size_t occupied_count() const;
  int resolution() const { return resolution_; }

 private:
  std::size_t cell_index(const Vec3& x) const;

  int resolution_;
  double bound_;
  std::vector<std::uint8_t> cells_;
};

/// Evaluates `source` at the given sample positions and fills in spacings
/// and transmittances.
RaySamples evaluate_ray(const Ray& ray, std::vector<double> t, const RadianceSource& source,
                        const OccupancyGrid* occupancy = nullptr);

struct RenderConfig {
  int samples_per_ray = 128;
  /// Jittered stratified samples (seeded per pixel) instead of midpoints.
  bool jitter = false;
  std::uint64_t seed = 0;
  double scene_bound = 1.0;
  int threads = 1;
  const OccupancyGrid* occupancy = nullptr;
};

/// Renders one pinhole view; rays that miss the scene cube stay black.
ImageF render_view(const CameraPose& pose, const Intrinsics& intrinsics, const RadianceSource& source,
                   const RenderConfig& cfg);

}  // namespace ssrecon::field
