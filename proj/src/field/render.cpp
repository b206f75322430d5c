#include <algorithm>
#include <cmath>
#include <limits>

#include "ssrecon/error.hpp"
#include "ssrecon/field/render.hpp"
#include "ssrecon/parallel.hpp"

namespace ssrecon::field {

bool Ray::valid() const {
  return origin.allFinite() && std::abs(direction.norm() - 1.0) <= 1e-6 && std::isfinite(near) &&
         std::isfinite(far) && near < far;
}

std::optional<Ray> clip_to_cube(const Vec3& origin, const Vec3& direction, double bound) {
  double enter = -std::numeric_limits<double>::infinity();
  double exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (direction[a] == 0.0) {
      if (origin[a] < -bound || origin[a] > bound) return std::nullopt;
      continue;
    }
    double t0 = (-bound - origin[a]) / direction[a];
    double t1 = (bound - origin[a]) / direction[a];
    if (t0 > t1) std::swap(t0, t1);
    enter = std::max(enter, t0);
    exit = std::min(exit, t1);
  }
  enter = std::max(enter, 0.0);
  if (!(exit > enter)) return std::nullopt;
  return Ray{origin, direction, enter, exit};
}

Vec3 pixel_direction(const CameraPose& pose, const Intrinsics& k, int px, int py) {
  const Vec3 cam((px + 0.5 - k.cx) / k.fx, (py + 0.5 - k.cy) / k.fy, 1.0);
  return (pose.rotation * cam).normalized();
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double SampleRng::operator()() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

std::vector<double> sample_ray_midpoints(const Ray& ray, int n) {
  return sample_ray(ray, n, [] { return 0.5; });
}

std::vector<double> sample_deltas(const Ray& ray, std::span<const double> t) {
  std::vector<double> d(t.size());
  for (std::size_t i = 0; i + 1 < t.size(); ++i) d[i] = t[i + 1] - t[i];
  if (!t.empty()) d.back() = ray.far - t.back();
  return d;
}

std::vector<double> transmittance(std::span<const double> densities, std::span<const double> deltas) {
  if (densities.size() != deltas.size()) throw Error(ErrorKind::ShapeMismatch, "densities and deltas differ in length");
  std::vector<double> t(densities.size());
  double acc = 1.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = acc;
    acc *= std::exp(-densities[i] * deltas[i]);
  }
  return t;
}

Rgb render_ray(const RaySamples& samples) {
  Rgb out = Rgb::Zero();
  double trans = 1.0;
  for (std::size_t i = 0; i < samples.densities.size(); ++i) {
    const double attenuation = std::exp(-samples.densities[i] * samples.deltas[i]);
    out += trans * (1.0 - attenuation) * samples.colors[i];
    trans *= attenuation;
  }
  return out;
}

void NeuralField::evaluate(std::span<const Vec3> points, const Vec3& direction, std::span<double> density,
                           std::span<Rgb> color) const {
  thread_local NetworkPass<float> pass;
  pass.forward(params_, points, direction);
  for (int i = 0; i < pass.size(); ++i) {
    density[i] = pass.density(i);
    for (int c = 0; c < 3; ++c) color[i][c] = pass.color(i, c);
  }
}

void AnalyticField::evaluate(std::span<const Vec3> points, const Vec3& direction, std::span<double> density,
                             std::span<Rgb> color) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    density[i] = density_(points[i]);
    color[i] = color_(points[i], direction);
  }
}

OccupancyGrid::OccupancyGrid(int resolution, double scene_bound)
    : resolution_(resolution), bound_(scene_bound),
      cells_(static_cast<std::size_t>(resolution) * resolution * resolution, 1) {
  if (resolution < 1 || !(scene_bound > 0.0)) throw Error(ErrorKind::Config, "invalid occupancy grid");
}

std::size_t OccupancyGrid::cell_index(const Vec3& x) const {
  std::size_t idx = 0;
  for (int a = 2; a >= 0; --a) {
    const double u = (x[a] + bound_) / (2.0 * bound_);
    const int c = std::clamp(static_cast<int>(std::floor(u * resolution_)), 0, resolution_ - 1);
    idx = idx * resolution_ + c;
  }
  return idx;
}

bool OccupancyGrid::occupied(const Vec3& x) const { return cells_[cell_index(x)] != 0; }

void OccupancyGrid::update(const RadianceSource& source, double threshold) {
  const double cell = 2.0 * bound_ / resolution_;
  std::vector<Vec3> points(resolution_);
  std::vector<double> density(resolution_);
  std::vector<Rgb> color(resolution_);
  for (int z = 0; z < resolution_; ++z) {
    for (int y = 0; y < resolution_; ++y) {
      for (int x = 0; x < resolution_; ++x) {
        points[x] = Vec3(-bound_ + (x + 0.5) * cell, -bound_ + (y + 0.5) * cell, -bound_ + (z + 0.5) * cell);
      }
      source.evaluate(points, Vec3::UnitZ(), density, color);
      for (int x = 0; x < resolution_; ++x) {
        cells_[(static_cast<std::size_t>(z) * resolution_ + y) * resolution_ + x] = density[x] > threshold ? 1 : 0;
      }
    }
  }
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::ranges::count(cells_, std::uint8_t{1}));
}

RaySamples evaluate_ray(const Ray& ray, std::vector<double> t, const RadianceSource& source,
                        const OccupancyGrid* occupancy) {
  RaySamples s;
  const std::size_t n = t.size();
  s.deltas = sample_deltas(ray, t);
  s.t = std::move(t);
  s.densities.assign(n, 0.0);
  s.colors.assign(n, Rgb::Zero());

  std::vector<std::size_t> live;
  std::vector<Vec3> points;
  live.reserve(n);
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = ray.at(s.t[i]);
    if (occupancy && !occupancy->occupied(p)) continue;
    live.push_back(i);
    points.push_back(p);
  }
  if (!points.empty()) {
    std::vector<double> density(points.size());
    std::vector<Rgb> color(points.size());
    source.evaluate(points, ray.direction, density, color);
    for (std::size_t k = 0; k < live.size(); ++k) {
      s.densities[live[k]] = density[k];
      s.colors[live[k]] = color[k];
    }
  }
  s.transmittances = transmittance(s.densities, s.deltas);
  return s;
}

ImageF render_view(const CameraPose& pose, const Intrinsics& intrinsics, const RadianceSource& source,
                   const RenderConfig& cfg) {
  if (cfg.samples_per_ray < 1) throw Error(ErrorKind::Config, "samples_per_ray must be >= 1");
  ImageF img(intrinsics.width, intrinsics.height);
  parallel_for(intrinsics.height, resolve_threads(cfg.threads), [&](int y0, int y1, int) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < intrinsics.width; ++x) {
        const auto ray = clip_to_cube(pose.translation, pixel_direction(pose, intrinsics, x, y), cfg.scene_bound);
        if (!ray) continue;
        std::vector<double> t;
        if (cfg.jitter) {
          SampleRng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(y) * intrinsics.width + x));
          t = sample_ray(*ray, cfg.samples_per_ray, rng);
        } else {
          t = sample_ray_midpoints(*ray, cfg.samples_per_ray);
        }
        const Rgb c = render_ray(evaluate_ray(*ray, std::move(t), source, cfg.occupancy));
        for (int ch = 0; ch < 3; ++ch) img(x, y, ch) = c[ch];
      }
    }
  });
  return img;
}

}  // namespace ssrecon::field
