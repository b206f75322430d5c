#pragma once

// Shared fixtures for the test binaries: seeded image generators, a
// reference Gaussian blur, statistics helpers and scratch directories.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "ssrecon/image.hpp"

namespace ssrecon::test {

inline ImageF random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ImageF img(w, h);
  for (double& s : img.samples()) s = u(rng);
  return img;
}

inline Plane random_plane(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Plane p(w, h);
  for (double& s : p.values()) s = u(rng);
  return p;
}

inline ImageF constant_image(int w, int h, double r, double g, double b) {
  ImageF img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img(x, y, 0) = r;
      img(x, y, 1) = g;
      img(x, y, 2) = b;
    }
  }
  return img;
}

/// Band-limited colored texture: a few random plane waves per channel,
/// rescaled to mean 0.5 and standard deviation `spread` per channel.
inline ImageF smooth_texture(int w, int h, std::uint64_t seed, double spread = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageF img(w, h);
  for (int c = 0; c < 3; ++c) {
    double kx[4], ky[4], ph[4], amp[4];
    for (int k = 0; k < 4; ++k) {
      kx[k] = (u(rng) * 2.0 - 1.0) * 6.0 * std::numbers::pi / w;
      ky[k] = (u(rng) * 2.0 - 1.0) * 6.0 * std::numbers::pi / h;
      ph[k] = u(rng) * 2.0 * std::numbers::pi;
      amp[k] = 0.5 + u(rng);
    }
    auto ch = img.channel(c);
    double mean = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += amp[k] * std::sin(kx[k] * x + ky[k] * y + ph[k]);
        ch[static_cast<std::size_t>(y) * w + x] = v;
        mean += v;
      }
    }
    mean /= static_cast<double>(ch.size());
    double var = 0.0;
    for (double v : ch) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(ch.size()));
    for (double& v : ch) v = std::clamp(0.5 + spread * (v - mean) / sd, 0.0, 1.0);
  }
  return img;
}

/// Separable Gaussian blur with replicated borders.
inline ImageF gaussian_blur(const ImageF& img, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  const int w = img.width(), h = img.height();
  ImageF tmp(w, h), out(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img(std::clamp(x + i, 0, w - 1), y, c);
        tmp(x, y, c) = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, std::clamp(y + i, 0, h - 1), c);
        out(x, y, c) = acc;
      }
    }
  }
  return out;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double channel_mean(const ImageF& img, int c) {
  double s = 0.0;
  for (double v : img.channel(c)) s += v;
  return s / static_cast<double>(img.pixel_count());
}

inline double sample_stddev(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

/// Fresh, empty scratch directory unique to this process.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ssrecon_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ssrecon::test
