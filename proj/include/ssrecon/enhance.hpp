#pragma once

#include <array>
#include <vector>

#include "ssrecon/image.hpp"

namespace ssrecon::enhance {

/// Per-channel statistics used by the statistical color stretch.
struct ChannelStats {
  double mean = 0.0;              // M_c
  double spread = 0.0;            // V_c, taken as the standard deviation
  double saturation_factor = 2.5; // mu
};

struct ColorCorrection {
  ImageF image;
  std::array<ChannelStats, 3> stats{};
  /// Set for channels that were perfectly constant; those channels are
  /// mapped to the mid level 0.5.
  std::array<bool, 3> zero_spread{};

  bool any_zero_spread() const { return zero_spread[0] || zero_spread[1] || zero_spread[2]; }
};

/// U_c = clamp(0.5 * (1 + (S_c - M_c) / (mu * V_c)), 0, 1) with V_c the
/// channel standard deviation.
ColorCorrection color_correct(const ImageF& img, double mu = 2.5);

struct ClaheConfig {
  int tiles_x = 4;
  int tiles_y = 4;
  /// Per-bin ceiling as a fraction of the tile's pixel count. 1/bins clips
  /// every bin to the mean count, which flattens the histogram completely.
  double clip_limit = 0.01;
  int bins = 256;

  void validate() const;
};

/// CLAHE on a single plane of values in [0, 1].
Plane clahe_plane(const Plane& plane, const ClaheConfig& cfg);

/// CLAHE applied to the luminance of `img`; chroma differences are kept.
ImageF clahe(const ImageF& img, const ClaheConfig& cfg = {});

/// Builds the clipped-histogram transfer function of one tile. Exposed so
/// tests can inspect individual tile mappings. Returns `bins` values in
/// [0, 1].
std::vector<double> clahe_tile_mapping(std::span<const double> tile_values, const ClaheConfig& cfg);

struct RetinexConfig {
  double smooth_grad_weight = 0.1;     // alpha: first-order illumination prior
  double smooth_lap_weight = 0.01;     // beta: second-order illumination prior
  double reflect_grad_weight = 0.05;   // l1 weight on reflectance gradients
  double reflect_lap_weight = 0.005;   // l1 weight on reflectance Laplacian
  int iterations = 8;
  double gamma = 2.2;
  double white_level = 1.0;

  void validate() const;
};

struct RetinexDecomposition {
  Plane illumination;
  Plane reflectance;
  /// Objective value at the initialization followed by one value per
  /// alternating round; non-increasing.
  std::vector<double> objective_trace;
};

inline constexpr double kLogFloor = 1e-4;
inline constexpr int kInitMaxFilterSize = 15;

/// Log-domain MAP decomposition luminance = illumination * reflectance.
/// Throws Error(NonFinite) if the solver diverges.
RetinexDecomposition retinex_decompose(const Plane& luminance, const RetinexConfig& cfg = {});

/// Objective of the decomposition evaluated on log-domain planes:
/// |l - i - r|^2 + a|grad i|^2 + b|lap i|^2 + g1|grad r|_1 + g2|lap r|_1.
double retinex_objective(const Plane& log_luminance, const Plane& log_illumination,
                         const Plane& log_reflectance, const RetinexConfig& cfg);

/// I_e = W * (I / W)^(1 / gamma).
Plane gamma_adjust(const Plane& illumination, double gamma, double white = 1.0);

enum class Stage { Clahe, ColorCorrect, Retinex };

struct EnhanceConfig {
  double mu = 2.5;
  ClaheConfig clahe;
  RetinexConfig retinex;
  std::vector<Stage> order{Stage::Clahe, Stage::ColorCorrect, Stage::Retinex};

  void validate() const;
};

struct EnhanceResult {
  ImageF image;
  bool zero_spread = false;
};

/// Full frame enhancement. The Retinex stage decomposes the luminance of the
/// current image, gamma-adjusts the illumination, recomposes
/// L_e = I_e * R and re-attaches the chroma of the image it received.
EnhanceResult enhance_frame(const ImageF& img, const EnhanceConfig& cfg);

ImageF enhance_frame(const ImageF& img, double mu, const ClaheConfig& clahe_cfg,
                     const RetinexConfig& retinex_cfg);

namespace ops {
// Discrete operators on planes. Gradients are forward differences that are
// zero on the last column/row; the Laplacian replicates the border, so
// laplacian(u) == -divergence-adjoint of the gradient.
Plane grad_x(const Plane& u);
Plane grad_y(const Plane& u);
Plane grad_adjoint(const Plane& px, const Plane& py);
Plane laplacian(const Plane& u);
Plane max_filter(const Plane& u, int size);
}  // namespace ops

}  // namespace ssrecon::enhance
