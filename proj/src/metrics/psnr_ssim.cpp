#include <algorithm>
#include <cmath>
#include <vector>

#include "ssrecon/error.hpp"
#include "ssrecon/metrics.hpp"

namespace ssrecon::metrics {

namespace {

void require_same_shape(const ImageF& a, const ImageF& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, "images differ in size");
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "valid" filtering: output is (w - size + 1) x (h - size + 1).
Plane filter_valid(const Plane& in, const std::vector<double>& k) {
  const int size = static_cast<int>(k.size());
  const int ow = in.width() - size + 1;
  const int oh = in.height() - size + 1;
  Plane rows(ow, in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < size; ++i) s += k[i] * in(x + i, y);
      rows(x, y) = s;
    }
  }
  Plane out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < size; ++i) s += k[i] * rows(x, y + i);
      out(x, y) = s;
    }
  }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane out(a.width(), a.height());
  auto av = a.values();
  auto bv = b.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  return out;
}

// Written so that swapping (x, y) permutes only commutative operations.
double ssim_term(double mx, double my, double vx, double vy, double cov, double c1, double c2) {
  return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace

double mean_squared_error(const ImageF& a, const ImageF& b) {
  require_same_shape(a, b);
  auto av = a.samples();
  auto bv = b.samples();
  if (av.empty()) throw Error(ErrorKind::TooSmall, "mse of empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return s / static_cast<double>(av.size());
}

double psnr(const ImageF& a, const ImageF& b) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return kPsnrCap;
  return std::min(10.0 * std::log10(1.0 / mse), kPsnrCap);
}

void SsimConfig::validate() const {
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw Error(ErrorKind::Config, "ssim constants must be positive");
  if (window < 3 || window % 2 == 0) throw Error(ErrorKind::Config, "ssim window must be odd and >= 3");
  if (!(sigma > 0.0) || !(dynamic_range > 0.0)) throw Error(ErrorKind::Config, "ssim sigma and range must be positive");
}

double ssim(const ImageF& a, const ImageF& b, const SsimConfig& cfg) {
  cfg.validate();
  require_same_shape(a, b);
  if (a.width() < cfg.window || a.height() < cfg.window) {
    throw Error(ErrorKind::TooSmall, "images are smaller than the SSIM window");
  }
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  const auto k = gaussian_kernel(cfg.window, cfg.sigma);

  const Plane x = luminance(a);
  const Plane y = luminance(b);
  const Plane mx = filter_valid(x, k);
  const Plane my = filter_valid(y, k);
  const Plane exx = filter_valid(product(x, x), k);
  const Plane eyy = filter_valid(product(y, y), k);
  const Plane exy = filter_valid(product(x, y), k);

  double sum = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double ux = mx.values()[i];
    const double uy = my.values()[i];
    const double vx = exx.values()[i] - ux * ux;
    const double vy = eyy.values()[i] - uy * uy;
    const double cov = exy.values()[i] - ux * uy;
    sum += ssim_term(ux, uy, vx, vy, cov, c1, c2);
  }
  return sum / static_cast<double>(mx.size());
}

double ssim_global(const ImageF& a, const ImageF& b, const SsimConfig& cfg) {
  cfg.validate();
  require_same_shape(a, b);
  if (a.empty()) throw Error(ErrorKind::TooSmall, "ssim of empty images");
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  const Plane x = luminance(a);
  const Plane y = luminance(b);
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x.values()[i];
    sy += y.values()[i];
  }
  const double ux = sx / n;
  const double uy = sy / n;
  double vx = 0, vy = 0, cov = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x.values()[i] - ux;
    const double dy = y.values()[i] - uy;
    vx += dx * dx;
    vy += dy * dy;
    cov += dx * dy;
  }
  return ssim_term(ux, uy, vx / n, vy / n, cov / n, c1, c2);
}

}  // namespace ssrecon::metrics
