#include <algorithm>
#include <cmath>
#include <vector>

#include "ssrecon/error.hpp"
#include "ssrecon/metrics.hpp"

namespace ssrecon::metrics {

namespace {

double srgb_to_linear(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

struct Lab {
  double l, a, b;
};

// sRGB (D65) to CIELab. The XYZ rows are pre-divided by the white point and
// expanded around the green channel, so equal RGB inputs give a = b = 0
// exactly.
Lab to_lab(double r, double g, double b) {
  r = srgb_to_linear(r);
  g = srgb_to_linear(g);
  b = srgb_to_linear(b);
  constexpr double m[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                              {0.2126729, 0.7151522, 0.0721750},
                              {0.0193339, 0.1191920, 0.9503041}};
  double xyz[3];
  for (int i = 0; i < 3; ++i) {
    const double white = m[i][0] + m[i][1] + m[i][2];
    xyz[i] = g + (m[i][0] / white) * (r - g) + (m[i][2] / white) * (b - g);
  }
  const double fx = lab_f(xyz[0]);
  const double fy = lab_f(xyz[1]);
  const double fz = lab_f(xyz[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

// Linear-interpolated percentile of sorted data, p in [0, 1].
double percentile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] + t * (sorted[hi] - sorted[lo]);
}

// Asymmetric alpha-trimmed mean and the variance around it.
std::pair<double, double> trimmed_stats(std::vector<double> values, double trim) {
  const std::size_t k = values.size();
  std::ranges::sort(values);
  const auto low = static_cast<std::size_t>(std::ceil(trim * static_cast<double>(k)));
  const auto high = static_cast<std::size_t>(std::floor(trim * static_cast<double>(k)));
  double mean = 0.0;
  if (low + high < k) {
    for (std::size_t i = low; i < k - high; ++i) mean += values[i];
    mean /= static_cast<double>(k - low - high);
  }
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, var / static_cast<double>(k)};
}

Plane sobel_magnitude(const Plane& p) {
  Plane out(p.width(), p.height());
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      auto at = [&](int dx, int dy) { return p.clamped(x + dx, y + dy); };
      const double gx = (at(1, -1) + 2.0 * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2.0 * at(-1, 0) + at(-1, 1));
      const double gy = (at(-1, 1) + 2.0 * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2.0 * at(0, -1) + at(1, -1));
      out(x, y) = std::hypot(gx, gy);
    }
  }
  return out;
}

// Blockwise measure of enhancement: 2/(k1 k2) sum log((max + 1)/(min + 1)).
// The unit offset (one grey level) keeps flat-bottomed blocks finite instead
// of dropping them, so the score does not jump when a minimum reaches zero.
double eme(const Plane& p, int block) {
  const int k1 = p.width() / block;
  const int k2 = p.height() / block;
  if (k1 == 0 || k2 == 0) return 0.0;
  double sum = 0.0;
  for (int by = 0; by < k2; ++by) {
    for (int bx = 0; bx < k1; ++bx) {
      double lo = INFINITY, hi = -INFINITY;
      for (int y = by * block; y < (by + 1) * block; ++y)
        for (int x = bx * block; x < (bx + 1) * block; ++x) {
          lo = std::min(lo, p(x, y));
          hi = std::max(hi, p(x, y));
        }
      sum += std::log((hi + 1.0) / (lo + 1.0));
    }
  }
  return 2.0 / (k1 * k2) * sum;
}

// Blockwise logAMEE over the three channels of each block.
double log_amee(const ImageF& img255, int block) {
  const int k1 = img255.width() / block;
  const int k2 = img255.height() / block;
  if (k1 == 0 || k2 == 0) return 0.0;
  double sum = 0.0;
  for (int by = 0; by < k2; ++by) {
    for (int bx = 0; bx < k1; ++bx) {
      double lo = INFINITY, hi = -INFINITY;
      for (int c = 0; c < 3; ++c)
        for (int y = by * block; y < (by + 1) * block; ++y)
          for (int x = bx * block; x < (bx + 1) * block; ++x) {
            lo = std::min(lo, img255(x, y, c));
            hi = std::max(hi, img255(x, y, c));
          }
      const double top = hi - lo;
      const double bottom = hi + lo;
      if (top != 0.0 && bottom != 0.0) {
        const double ratio = top / bottom;
        sum += ratio * std::log(ratio);
      }
    }
  }
  return -1.0 / (k1 * k2) * sum;
}

}  // namespace

UciqeComponents uciqe_components(const ImageF& img) {
  if (img.empty()) throw Error(ErrorKind::TooSmall, "uciqe of an empty image");
  const std::size_t n = img.pixel_count();
  std::vector<double> light(n), chroma(n);
  double sat_sum = 0.0;
  double chroma_sum = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Lab lab = to_lab(img(x, y, 0), img(x, y, 1), img(x, y, 2));
      const std::size_t i = static_cast<std::size_t>(y) * img.width() + x;
      light[i] = lab.l / 100.0;
      chroma[i] = std::hypot(lab.a, lab.b) / 100.0;
      chroma_sum += chroma[i];
      if (light[i] > 0.0) sat_sum += chroma[i] / light[i];
    }
  }
  const double chroma_mean = chroma_sum / static_cast<double>(n);
  double chroma_var = 0.0;
  for (double c : chroma) chroma_var += (c - chroma_mean) * (c - chroma_mean);

  UciqeComponents out;
  out.chroma_std = std::sqrt(chroma_var / static_cast<double>(n));
  std::ranges::sort(light);
  out.luminance_contrast = percentile(light, 0.99) - percentile(light, 0.01);
  out.mean_saturation = sat_sum / static_cast<double>(n);
  out.total = kUciqeChroma * out.chroma_std + kUciqeContrast * out.luminance_contrast +
              kUciqeSaturation * out.mean_saturation;
  return out;
}

double uciqe(const ImageF& img) { return uciqe_components(img).total; }

UiqmComponents uiqm_components(const ImageF& img, const UiqmConfig& cfg) {
  if (img.empty()) throw Error(ErrorKind::TooSmall, "uiqm of an empty image");
  ImageF s = img;
  for (double& v : s.samples()) v *= 255.0;

  const std::size_t n = s.pixel_count();
  std::vector<double> rg(n), yb(n);
  auto r = s.channel(0);
  auto g = s.channel(1);
  auto b = s.channel(2);
  for (std::size_t i = 0; i < n; ++i) {
    rg[i] = r[i] - g[i];
    yb[i] = 0.5 * (r[i] + g[i]) - b[i];
  }
  const auto [mu_rg, var_rg] = trimmed_stats(std::move(rg), cfg.trim_fraction);
  const auto [mu_yb, var_yb] = trimmed_stats(std::move(yb), cfg.trim_fraction);

  UiqmComponents out;
  out.uicm = -0.0268 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb) + 0.1586 * std::sqrt(var_rg + var_yb);

  constexpr double lambda[3] = {0.299, 0.587, 0.114};
  for (int c = 0; c < 3; ++c) {
    const Plane channel = s.plane(c);
    const Plane edges = sobel_magnitude(channel);
    Plane weighted(channel.width(), channel.height());
    for (std::size_t i = 0; i < weighted.size(); ++i) {
      weighted.values()[i] = edges.values()[i] * channel.values()[i];
    }
    out.uism += lambda[c] * eme(weighted, cfg.block_size);
  }
  out.uiconm = log_amee(s, cfg.block_size);
  out.total = kUiqmColorfulness * out.uicm + kUiqmSharpness * out.uism + kUiqmContrast * out.uiconm;
  return out;
}

double uiqm(const ImageF& img, const UiqmConfig& cfg) { return uiqm_components(img, cfg).total; }

}  // namespace ssrecon::metrics
