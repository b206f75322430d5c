#include <algorithm>

#include "ssrecon/enhance.hpp"
#include "ssrecon/error.hpp"

namespace ssrecon::enhance {

void EnhanceConfig::validate() const {
  if (!(mu > 0.0)) throw Error(ErrorKind::Config, "mu must be positive");
  clahe.validate();
  retinex.validate();
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (order[i] == order[j]) throw Error(ErrorKind::Config, "enhancement order lists a stage twice");
    }
  }
}

namespace {

ImageF retinex_recompose(const ImageF& img, const RetinexConfig& cfg) {
  const Plane luma = luminance(img);
  const RetinexDecomposition parts = retinex_decompose(luma, cfg);
  const Plane lit = gamma_adjust(parts.illumination, cfg.gamma, cfg.white_level);
  Plane recomposed(luma.width(), luma.height());
  auto out = recomposed.values();
  auto ill = lit.values();
  auto refl = parts.reflectance.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ill[i] * refl[i];
  return replace_luminance(img, luma, recomposed);
}

}  // namespace

EnhanceResult enhance_frame(const ImageF& img, const EnhanceConfig& cfg) {
  cfg.validate();
  if (img.width() < 8 || img.height() < 8) {
    throw Error(ErrorKind::TooSmall, "enhancement needs at least an 8x8 image");
  }
  EnhanceResult result{clamp01(img), false};
  for (Stage stage : cfg.order) {
    switch (stage) {
      case Stage::Clahe:
        result.image = clahe(result.image, cfg.clahe);
        break;
      case Stage::ColorCorrect: {
        ColorCorrection cc = color_correct(result.image, cfg.mu);
        result.zero_spread = result.zero_spread || cc.any_zero_spread();
        result.image = std::move(cc.image);
        break;
      }
      case Stage::Retinex:
        result.image = retinex_recompose(result.image, cfg.retinex);
        break;
    }
  }
  return result;
}

ImageF enhance_frame(const ImageF& img, double mu, const ClaheConfig& clahe_cfg,
                     const RetinexConfig& retinex_cfg) {
  EnhanceConfig cfg;
  cfg.mu = mu;
  cfg.clahe = clahe_cfg;
  cfg.retinex = retinex_cfg;
  return enhance_frame(img, cfg).image;
}

}  // namespace ssrecon::enhance
