#pragma once

#include "ssrecon/image.hpp"

namespace ssrecon::metrics {

/// Reported value for identical images (MSE = 0).
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all samples of all channels, capped at kPsnrCap.
/// Throws ShapeMismatch.
double psnr(const ImageF& a, const ImageF& b);

double mean_squared_error(const ImageF& a, const ImageF& b);

struct SsimConfig {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  int window = 11;
  double sigma = 1.5;

  void validate() const;
};

/// Mean of the Gaussian-windowed local SSIM map on the luminance plane,
/// evaluated at every position where the window fits inside the image.
double ssim(const ImageF& a, const ImageF& b, const SsimConfig& cfg = {});

/// SSIM with image-wide means, variances and covariance (single window).
double ssim_global(const ImageF& a, const ImageF& b, const SsimConfig& cfg = {});

struct UciqeComponents {
  double chroma_std = 0.0;
  double luminance_contrast = 0.0;
  double mean_saturation = 0.0;
  double total = 0.0;
};

inline constexpr double kUciqeChroma = 0.4680;
inline constexpr double kUciqeContrast = 0.2745;
inline constexpr double kUciqeSaturation = 0.2576;

/// Color space used for UCIQE: CIELab (D65, sRGB primaries) with L, a, b
/// scaled by 1/100. Saturation is chroma / lightness (0 where L = 0).
inline constexpr const char* kUciqeColorSpace = "CIELab-D65/100";

UciqeComponents uciqe_components(const ImageF& img);
double uciqe(const ImageF& img);

struct UiqmComponents {
  double uicm = 0.0;
  double uism = 0.0;
  double uiconm = 0.0;
  double total = 0.0;
};

inline constexpr double kUiqmColorfulness = 0.0282;
inline constexpr double kUiqmSharpness = 0.2953;
inline constexpr double kUiqmContrast = 3.5753;

struct UiqmConfig {
  double trim_fraction = 0.1;
  int block_size = 8;
};

/// UIQM computed on the 0..255 scale the coefficients were fitted on.
UiqmComponents uiqm_components(const ImageF& img, const UiqmConfig& cfg = {});
double uiqm(const ImageF& img, const UiqmConfig& cfg = {});

}  // namespace ssrecon::metrics
