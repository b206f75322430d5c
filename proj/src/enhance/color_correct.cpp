#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssrecon/enhance.hpp"
#include "ssrecon/error.hpp"

namespace ssrecon::enhance {

ColorCorrection color_correct(const ImageF& img, double mu) {
  if (!(mu > 0.0)) throw Error(ErrorKind::Config, "saturation factor mu must be positive");
  if (img.empty()) throw Error(ErrorKind::TooSmall, "color_correct on an empty image");

  ColorCorrection result;
  result.image = ImageF(img.width(), img.height());
  for (int c = 0; c < ImageF::kChannels; ++c) {
    auto in = img.channel(c);
    auto out = result.image.channel(c);
    const double n = static_cast<double>(in.size());
    const auto [lo, hi] = std::ranges::minmax(in);
    const double mean = std::accumulate(in.begin(), in.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : in) ss += (s - mean) * (s - mean);
    // Sample standard deviation; a single pixel has no spread.
    const double spread = (in.size() > 1 && hi > lo) ? std::sqrt(ss / (n - 1.0)) : 0.0;
    result.stats[c] = {mean, spread, mu};

    if (spread == 0.0) {
      result.zero_spread[c] = true;
      std::ranges::fill(out, 0.5);
      continue;
    }
    const double scale = 1.0 / (mu * spread);
    for (std::size_t i = 0; i < in.size(); ++i) {
      out[i] = std::clamp(0.5 * (1.0 + (in[i] - mean) * scale), 0.0, 1.0);
    }
  }
  return result;
}

}  // namespace ssrecon::enhance
