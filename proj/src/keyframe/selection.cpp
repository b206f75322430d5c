#include <algorithm>
#include <numeric>

#include "ssrecon/error.hpp"
#include "ssrecon/keyframe.hpp"

namespace ssrecon::keyframe {

void SelectionConfig::validate() const {
  if (w1 < 0.0 || w1 > 1.0 || w2 < 0.0 || w2 > 1.0) {
    throw Error(ErrorKind::Config, "selection weights must lie in [0, 1]");
  }
  if (w1 + w2 > 1.0 + 1e-12) throw Error(ErrorKind::Config, "selection weights must satisfy w1 + w2 <= 1");
  if (window < 1) throw Error(ErrorKind::Config, "selection window must be >= 1");
  if (keep_per_window < 1) throw Error(ErrorKind::Config, "keep_per_window must be >= 1");
}

double sharpness(const Plane& luma) {
  const int w = luma.width();
  const int h = luma.height();
  if (w < 3 || h < 3) throw Error(ErrorKind::TooSmall, "sharpness needs at least a 3x3 image");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double lap = 4.0 * luma(x, y) - luma(x - 1, y) - luma(x + 1, y) - luma(x, y - 1) - luma(x, y + 1);
      sum += lap;
      sum_sq += lap * lap;
    }
  }
  const double n = static_cast<double>(w - 2) * (h - 2);
  const double mean = sum / n;
  return std::max(sum_sq / n - mean * mean, 0.0);
}

double sharpness(const ImageF& img) { return sharpness(luminance(img)); }

double TermRange::normalize(double v) const {
  if (!(max > min)) return 0.5;
  return std::clamp((v - min) / (max - min), 0.0, 1.0);
}

void TermRange::include(double v) {
  min = std::min(min, v);
  max = std::max(max, v);
}

TermRange TermRange::of(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::ranges::minmax(values);
  return {lo, hi};
}

double importance(double sharp, double dis, double theta, const WindowExtrema& window,
                  const SelectionConfig& cfg) {
  return cfg.w1 * window.sharpness.normalize(sharp) + cfg.w2 * window.displacement.normalize(dis) +
         (1.0 - cfg.w1 - cfg.w2) * window.angle.normalize(theta);
}

std::vector<FrameRecord> select_keyframes(std::span<const FrameRecord> frames, const SelectionConfig& cfg) {
  cfg.validate();
  if (frames.empty()) return {};
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].pose) {
      throw Error(ErrorKind::MissingPose, "frame " + std::to_string(frames[i].frame_id) + " has no pose");
    }
    if (i > 0 && frames[i].frame_id <= frames[i - 1].frame_id) {
      throw Error(ErrorKind::Config, "frame ids must be strictly increasing");
    }
  }

  std::vector<FrameRecord> selected;
  selected.push_back(frames.front());
  selected.back().importance = 1.0;
  CameraPose reference = *frames.front().pose;

  const std::size_t window = static_cast<std::size_t>(cfg.window);
  for (std::size_t begin = 1; begin < frames.size(); begin += window) {
    const std::size_t end = std::min(begin + window, frames.size());
    const std::size_t n = end - begin;
    std::vector<double> sharp(n), dis(n), theta(n);
    for (std::size_t k = 0; k < n; ++k) {
      const FrameRecord& f = frames[begin + k];
      sharp[k] = f.sharpness;
      dis[k] = displacement(*f.pose, reference);
      theta[k] = angular_difference(*f.pose, reference);
    }
    const WindowExtrema extrema{TermRange::of(sharp), TermRange::of(dis), TermRange::of(theta)};

    std::vector<FrameRecord> scored(frames.begin() + begin, frames.begin() + end);
    for (std::size_t k = 0; k < n; ++k) scored[k].importance = importance(sharp[k], dis[k], theta[k], extrema, cfg);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
      if (scored[a].importance != scored[b].importance) return scored[a].importance > scored[b].importance;
      return scored[a].frame_id < scored[b].frame_id;
    });
    order.resize(std::min<std::size_t>(n, cfg.keep_per_window));
    std::ranges::sort(order);
    for (std::size_t k : order) selected.push_back(scored[k]);
    reference = *selected.back().pose;
  }
  return selected;
}

}  // namespace ssrecon::keyframe
