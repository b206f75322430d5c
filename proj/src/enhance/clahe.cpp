#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssrecon/enhance.hpp"
#include "ssrecon/error.hpp"

namespace ssrecon::enhance {

void ClaheConfig::validate() const {
  if (tiles_x < 1 || tiles_y < 1) throw Error(ErrorKind::Config, "clahe tiles must be >= 1");
  if (bins < 2) throw Error(ErrorKind::Config, "clahe bins must be >= 2");
  if (!(clip_limit > 0.0) || clip_limit * bins < 1.0 - 1e-12) {
    throw Error(ErrorKind::Config, "clahe clip_limit must satisfy clip_limit * bins >= 1");
  }
}

namespace {

int bin_of(double v, int bins) {
  const int b = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * bins));
  return std::min(b, bins - 1);
}

// Clip every bin at `limit` and hand the excess back uniformly, repeating
// until nothing is above the limit. The fixed point of that loop is
// h'_k = min(h_k + u, limit) with sum(h') = total, solved here for u directly.
std::vector<double> clip_and_redistribute(std::vector<double> hist, double limit) {
  const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
  const bool clipped = std::ranges::any_of(hist, [&](double h) { return h > limit; });
  if (!clipped) return hist;

  std::vector<double> sorted = hist;
  std::ranges::sort(sorted);
  const std::size_t n = sorted.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + sorted[k];

  // The m smallest bins stay below the limit, the rest saturate.
  double u = limit;
  for (std::size_t m = n; m >= 1; --m) {
    const double candidate =
        (total - static_cast<double>(n - m) * limit - prefix[m]) / static_cast<double>(m);
    const bool fits_low = sorted[m - 1] + candidate <= limit;
    const bool fits_high = m == n || sorted[m] + candidate >= limit;
    if (candidate >= 0.0 && fits_low && fits_high) {
      u = candidate;
      break;
    }
  }
  for (double& h : hist) h = std::min(h + u, limit);
  return hist;
}

}  // namespace

std::vector<double> clahe_tile_mapping(std::span<const double> tile_values, const ClaheConfig& cfg) {
  std::vector<double> hist(cfg.bins, 0.0);
  for (double v : tile_values) hist[bin_of(v, cfg.bins)] += 1.0;
  const double n = static_cast<double>(tile_values.size());
  if (n == 0.0) {
    std::vector<double> identity(cfg.bins);
    for (int k = 0; k < cfg.bins; ++k) identity[k] = (k + 1.0) / cfg.bins;
    return identity;
  }
  const double limit = std::max(cfg.clip_limit * n, n / cfg.bins);
  hist = clip_and_redistribute(std::move(hist), limit);

  std::vector<double> mapping(cfg.bins);
  double acc = 0.0;
  for (int k = 0; k < cfg.bins; ++k) {
    acc += hist[k];
    mapping[k] = std::min(acc / n, 1.0);
  }
  return mapping;
}

Plane clahe_plane(const Plane& plane, const ClaheConfig& cfg) {
  cfg.validate();
  const int w = plane.width();
  const int h = plane.height();
  if (w < cfg.tiles_x || h < cfg.tiles_y) {
    throw Error(ErrorKind::TooSmall, "image is smaller than the CLAHE tile grid");
  }

  // Tile boundaries split the image as evenly as possible.
  auto edges = [](int extent, int tiles) {
    std::vector<int> e(tiles + 1);
    for (int i = 0; i <= tiles; ++i) e[i] = static_cast<int>(static_cast<long long>(i) * extent / tiles);
    return e;
  };
  const auto ex = edges(w, cfg.tiles_x);
  const auto ey = edges(h, cfg.tiles_y);

  std::vector<std::vector<double>> maps(static_cast<std::size_t>(cfg.tiles_x) * cfg.tiles_y);
  std::vector<double> buffer;
  for (int ty = 0; ty < cfg.tiles_y; ++ty) {
    for (int tx = 0; tx < cfg.tiles_x; ++tx) {
      buffer.clear();
      for (int y = ey[ty]; y < ey[ty + 1]; ++y)
        for (int x = ex[tx]; x < ex[tx + 1]; ++x) buffer.push_back(plane(x, y));
      maps[ty * cfg.tiles_x + tx] = clahe_tile_mapping(buffer, cfg);
    }
  }

  auto centers = [](const std::vector<int>& e) {
    std::vector<double> c(e.size() - 1);
    for (std::size_t i = 0; i + 1 < e.size(); ++i) c[i] = 0.5 * (e[i] + e[i + 1]) - 0.5;
    return c;
  };
  const auto cx = centers(ex);
  const auto cy = centers(ey);

  // Neighbouring tile pair and blend weight along one axis.
  struct Span1 { int lo, hi; double t; };
  auto locate = [](const std::vector<double>& c, double p) {
    const int n = static_cast<int>(c.size());
    if (p <= c.front()) return Span1{0, 0, 0.0};
    if (p >= c.back()) return Span1{n - 1, n - 1, 0.0};
    int i = 0;
    while (i + 1 < n && c[i + 1] <= p) ++i;
    return Span1{i, i + 1, (p - c[i]) / (c[i + 1] - c[i])};
  };

  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    const Span1 sy = locate(cy, y);
    for (int x = 0; x < w; ++x) {
      const Span1 sx = locate(cx, x);
      const int b = bin_of(plane(x, y), cfg.bins);
      auto m = [&](int tx, int ty) { return maps[ty * cfg.tiles_x + tx][b]; };
      const double top = (1.0 - sx.t) * m(sx.lo, sy.lo) + sx.t * m(sx.hi, sy.lo);
      const double bottom = (1.0 - sx.t) * m(sx.lo, sy.hi) + sx.t * m(sx.hi, sy.hi);
      out(x, y) = std::clamp((1.0 - sy.t) * top + sy.t * bottom, 0.0, 1.0);
    }
  }
  return out;
}

ImageF clahe(const ImageF& img, const ClaheConfig& cfg) {
  const Plane y = luminance(img);
  const Plane equalized = clahe_plane(y, cfg);
  return replace_luminance(img, y, equalized);
}

}  // namespace ssrecon::enhance
