#include <doctest.h>

#include <cmath>
#include <random>

#include "ssrecon/error.hpp"
#include "ssrecon/field/render.hpp"

using namespace ssrecon;
using namespace ssrecon::field;

namespace {

AnalyticField homogeneous(double sigma, const Rgb& c) {
  return AnalyticField([sigma](const Vec3&) { return sigma; }, [c](const Vec3&, const Vec3&) { return c; });
}

// Smooth blob with position-dependent color.
AnalyticField blob() {
  return AnalyticField(
      [](const Vec3& x) { return 6.0 * std::exp(-4.0 * x.squaredNorm()); },
      [](const Vec3& x, const Vec3&) { return Rgb(0.5 + 0.4 * x[0], 0.5 + 0.4 * x[1], 0.3 + 0.2 * x[2]); });
}

// Fine trapezoidal quadrature of the continuous volume rendering integral.
Rgb quadrature(const Ray& ray, const AnalyticField& f, int n = 20000) {
  const double h = (ray.far - ray.near) / n;
  Rgb out = Rgb::Zero();
  double optical = 0.0;
  double prev_sigma = 0.0;
  Rgb prev_term = Rgb::Zero();
  for (int i = 0; i <= n; ++i) {
    const Vec3 p = ray.at(ray.near + i * h);
    double sigma = 0.0;
    Rgb c;
    f.evaluate(std::span<const Vec3>(&p, 1), ray.direction, std::span<double>(&sigma, 1), std::span<Rgb>(&c, 1));
    if (i > 0) optical += 0.5 * h * (prev_sigma + sigma);
    const Rgb term = std::exp(-optical) * sigma * c;
    if (i > 0) out += 0.5 * h * (prev_term + term);
    prev_sigma = sigma;
    prev_term = term;
  }
  return out;
}

CameraPose camera_at(const Vec3& eye) { return look_at(eye, Vec3::Zero()); }

}  // namespace

TEST_CASE("ray validity and cube clipping") {
  CHECK(Ray{}.valid());
  CHECK_FALSE((Ray{Vec3::Zero(), Vec3(0, 0, 2), 0, 1}.valid()));
  CHECK_FALSE((Ray{Vec3::Zero(), Vec3::UnitZ(), 1, 1}.valid()));

  const auto r = clip_to_cube(Vec3(0, 0, -3), Vec3::UnitZ(), 1.0);
  REQUIRE(r);
  CHECK(r->near == doctest::Approx(2.0));
  CHECK(r->far == doctest::Approx(4.0));
  CHECK_FALSE(clip_to_cube(Vec3(0, 2, -3), Vec3::UnitZ(), 1.0));
  CHECK_FALSE(clip_to_cube(Vec3(0, 0, 3), Vec3::UnitZ(), 1.0));
  const auto inside = clip_to_cube(Vec3(0.5, 0, 0), Vec3::UnitX(), 1.0);
  REQUIRE(inside);
  CHECK(inside->near == 0.0);
  CHECK(inside->far == doctest::Approx(0.5));
}

TEST_CASE("pixel_direction follows the pinhole model") {
  const Intrinsics k{100.0, 80.0, 32.0, 24.0, 64, 48};
  const CameraPose id;
  const Vec3 d = pixel_direction(id, k, 10, 30);
  const Vec3 expect = Vec3((10.5 - 32.0) / 100.0, (30.5 - 24.0) / 80.0, 1.0).normalized();
  CHECK((d - expect).norm() < 1e-15);
  const CameraPose cam = camera_at(Vec3(0, 0, -2.5));
  CHECK((pixel_direction(cam, Intrinsics{64, 64, 32, 32, 64, 64}, 31, 31) - Vec3::UnitZ()).norm() < 0.02);
}

TEST_CASE("stratified sampling") {
  const Ray ray{Vec3::Zero(), Vec3::UnitZ(), 1.0, 3.0};
  CHECK(sample_ray_midpoints(ray, 1) == std::vector<double>{2.0});
  const auto mids = sample_ray_midpoints(ray, 8);
  for (int i = 0; i < 8; ++i) CHECK(mids[i] == doctest::Approx(1.0 + (i + 0.5) * 2.0 / 8));

  SampleRng rng(42);
  const auto t = sample_ray(ray, 4, rng);
  for (int i = 0; i < 4; ++i) {
    CHECK(t[i] >= 1.0 + i * 0.5);
    CHECK(t[i] < 1.0 + (i + 1) * 0.5);
  }
  CHECK(std::ranges::is_sorted(t));
  SampleRng again(42);
  CHECK(sample_ray(ray, 4, again) == t);

  SampleRng r1(7);
  for (int k = 0; k < 1000; ++k) {
    const double u = r1();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("sample spacings run to the far bound") {
  const Ray ray{Vec3::Zero(), Vec3::UnitZ(), 0.0, 1.0};
  const std::vector<double> t{0.1, 0.35, 0.8};
  const auto d = sample_deltas(ray, t);
  CHECK(d[0] == doctest::Approx(0.25));
  CHECK(d[1] == doctest::Approx(0.45));
  CHECK(d[2] == doctest::Approx(0.2));
}

TEST_CASE("transmittance hand values and oracle") {
  const std::vector<double> zero(5, 0.0), half(5, 0.5);
  for (double v : transmittance(zero, half)) CHECK(v == 1.0);
  const auto geo = transmittance(std::vector<double>(6, 2.0), std::vector<double>(6, 0.5));
  for (int i = 0; i < 6; ++i) CHECK(geo[i] == doctest::Approx(std::exp(-double(i))).epsilon(1e-14));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(32), d(32);
    for (int i = 0; i < 32; ++i) s[i] = u(rng), d[i] = 0.01 + 0.1 * u(rng);
    const auto t = transmittance(s, d);
    double cum = 0.0;
    CHECK(t[0] == 1.0);
    for (int i = 0; i < 32; ++i) {
      CHECK(std::abs(t[i] - std::exp(-cum)) <= 1e-12);
      if (i > 0) CHECK(t[i] <= t[i - 1]);
      CHECK(t[i] > 0.0);
      cum += s[i] * d[i];
    }
  }
  CHECK_THROWS_AS(transmittance(std::vector<double>(3, 1.0), std::vector<double>(2, 1.0)), Error);
}

TEST_CASE("render_ray limits and partition of unity") {
  const Ray ray{Vec3::Zero(), Vec3::UnitZ(), 0.0, 2.0};
  const Rgb c(0.2, 0.6, 0.9);
  const auto empty = evaluate_ray(ray, sample_ray_midpoints(ray, 16), homogeneous(0.0, c));
  CHECK(render_ray(empty) == Rgb::Zero());

  RaySamples opaque;
  opaque.t = {1.0};
  opaque.deltas = {1.0};
  opaque.densities = {1e4};
  opaque.colors = {c};
  opaque.transmittances = {1.0};
  CHECK((render_ray(opaque) - c).norm() < 1e-12);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  RaySamples s = evaluate_ray(ray, sample_ray_midpoints(ray, 24), homogeneous(1.0, Rgb::Ones()));
  for (double& v : s.densities) v = u(rng);
  s.transmittances = transmittance(s.densities, s.deltas);
  double weights = 0.0;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const double w = s.transmittances[i] * (1.0 - std::exp(-s.densities[i] * s.deltas[i]));
    if (i + 1 < s.t.size()) CHECK(s.transmittances[i + 1] == doctest::Approx(s.transmittances[i] * std::exp(-s.densities[i] * s.deltas[i])).epsilon(1e-15));
    weights += w;
  }
  const double t_end = s.transmittances.back() * std::exp(-s.densities.back() * s.deltas.back());
  CHECK(weights == doctest::Approx(1.0 - t_end).epsilon(1e-12));
  CHECK(render_ray(s)[0] == doctest::Approx(weights).epsilon(1e-12));
  CHECK(render_ray(s).maxCoeff() <= 1.0);
}

TEST_CASE("homogeneous medium matches the closed-form integral") {
  const double sigma = 1.7, length = 1.5;
  const Rgb c(0.3, 0.5, 0.8);
  const Ray ray{Vec3::Zero(), Vec3::UnitZ(), 0.5, 0.5 + length};
  const Rgb exact = c * (1.0 - std::exp(-sigma * length));
  const Rgb got = render_ray(evaluate_ray(ray, sample_ray_midpoints(ray, 1024), homogeneous(sigma, c)));
  CHECK((got - exact).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("discretization error shrinks as the sample count doubles") {
  const double sigma = 2.0, length = 1.0;
  const Rgb c = Rgb::Ones();
  const Ray ray{Vec3::Zero(), Vec3::UnitZ(), 0.0, length};
  const double exact = 1.0 - std::exp(-sigma * length);
  const auto field = homogeneous(sigma, c);
  double last = INFINITY;
  for (int n = 16; n <= 1024; n *= 2) {
    double err = 0.0;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
      SampleRng rng(mix_seed(seed, n));
      err += std::abs(render_ray(evaluate_ray(ray, sample_ray(ray, n, rng), field))[0] - exact);
    }
    err /= 64;
    CHECK(err < last);
    last = err;
  }
}

TEST_CASE("render_view of an analytic field matches per-pixel quadrature") {
  const Intrinsics k{10.0, 10.0, 4.0, 4.0, 8, 8};
  const CameraPose pose = camera_at(Vec3(0.3, -0.2, -2.5));
  const AnalyticField f = blob();
  RenderConfig cfg;
  cfg.samples_per_ray = 2048;
  const ImageF img = render_view(pose, k, f, cfg);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const auto ray = clip_to_cube(pose.translation, pixel_direction(pose, k, x, y), 1.0);
      const Rgb oracle = ray ? quadrature(*ray, f) : Rgb::Zero();
      for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(img(x, y, ch) - oracle[ch]) <= 1e-3);
    }
  }
}

TEST_CASE("render_view basics") {
  const Intrinsics k{12.0, 12.0, 6.0, 6.0, 12, 12};
  const CameraPose pose = camera_at(Vec3(0, 0, -2.5));
  const ImageF black = render_view(pose, k, homogeneous(0.0, Rgb::Ones()), RenderConfig{});
  for (double v : black.samples()) CHECK(v == 0.0);

  RenderConfig jitter;
  jitter.jitter = true;
  jitter.seed = 5;
  jitter.samples_per_ray = 32;
  const AnalyticField f = blob();
  const ImageF a = render_view(pose, k, f, jitter);
  const ImageF b = render_view(pose, k, f, jitter);
  CHECK(std::ranges::equal(a.samples(), b.samples()));
  jitter.threads = 3;
  const ImageF c = render_view(pose, k, f, jitter);
  CHECK(std::ranges::equal(a.samples(), c.samples()));

  // Looking away from the cube leaves the image black.
  const CameraPose away = look_at(Vec3(0, 0, -2.5), Vec3(0, 0, -5));
  for (double v : render_view(away, k, f, RenderConfig{}).samples()) CHECK(v == 0.0);

  RenderConfig bad;
  bad.samples_per_ray = 0;
  CHECK_THROWS_AS(render_view(pose, k, f, bad), Error);
}

TEST_CASE("occupancy grid marks dense cells and skipping empty space is harmless") {
  // A cube aligned with the cell faces, so no cell is partly occupied.
  const AnalyticField ball([](const Vec3& x) { return x.cwiseAbs().maxCoeff() < 0.5 ? 5.0 : 0.0; },
                           [](const Vec3&, const Vec3&) { return Rgb(0.9, 0.4, 0.1); });
  OccupancyGrid grid(16, 1.0);
  CHECK(grid.occupied_count() == 16u * 16 * 16);
  grid.update(ball, 0.01);
  CHECK(grid.occupied(Vec3::Zero()));
  CHECK_FALSE(grid.occupied(Vec3(0.9, 0.9, 0.9)));
  CHECK(grid.occupied_count() < 16u * 16 * 16 / 4);

  const Intrinsics k{12.0, 12.0, 6.0, 6.0, 12, 12};
  const CameraPose pose = camera_at(Vec3(0.1, 0.2, -2.5));
  RenderConfig cfg;
  cfg.samples_per_ray = 64;
  const ImageF full = render_view(pose, k, ball, cfg);
  cfg.occupancy = &grid;
  const ImageF skipped = render_view(pose, k, ball, cfg);
  CHECK(std::ranges::equal(full.samples(), skipped.samples()));
  CHECK_THROWS_AS(OccupancyGrid(0, 1.0), Error);
}
