#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ssrecon::field {

using Vec3 = Eigen::Vector3d;
using Rgb = Eigen::Vector3d;

/// Multi-resolution hash grid over the cube [-scene_bound, scene_bound]^3.
struct HashGridConfig {
  int levels = 8;
  int features_per_level = 2;
  int table_size_log2 = 14;
  int base_resolution = 16;
  /// Per-level resolution growth; 0 selects the factor that brings the
  /// finest level to kDefaultFinestResolution.
  double growth_factor = 0.0;
  double scene_bound = 1.0;

  static constexpr int kDefaultFinestResolution = 256;

  double growth() const;
  /// floor(base_resolution * growth^level)
  int resolution(int level) const;
  std::uint32_t table_size() const { return std::uint32_t{1} << table_size_log2; }
  int feature_dim() const { return levels * features_per_level; }
  void validate() const;

  bool operator==(const HashGridConfig&) const = default;
};

/// Tiny two-headed MLP: density head on hash features, color head on the
/// density head's geometry features plus a frequency encoding of the
/// viewing direction.
struct MlpConfig {
  int hidden_width = 64;
  int hidden_layers = 1;
  int geo_features = 15;
  int direction_order = 4;

  int direction_dim() const { return 3 + 6 * direction_order; }
  void validate() const;

  bool operator==(const MlpConfig&) const = default;
};

struct FieldConfig {
  HashGridConfig grid;
  MlpConfig mlp;

  void validate() const {
    grid.validate();
    mlp.validate();
  }
  bool operator==(const FieldConfig&) const = default;
};

struct LayerShape {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;  // row-major in x out
  std::size_t bias_offset = 0;
};

/// Offsets of every trainable array inside the flat parameter vector, in
/// declaration order: hash tables (level-major), density layers, color
/// layers.
struct ParamLayout {
  explicit ParamLayout(const FieldConfig& cfg);

  std::size_t table_offset(int level) const { return level * level_stride; }

  std::size_t level_stride = 0;
  std::size_t tables_size = 0;
  std::vector<LayerShape> density_layers;
  std::vector<LayerShape> color_layers;
  std::size_t total = 0;
};

template <typename T>
class FieldParamsT {
 public:
  explicit FieldParamsT(const FieldConfig& cfg);

  /// Hash entries uniform in [-1e-4, 1e-4], Glorot-uniform weights, zero
  /// biases.
  static FieldParamsT initialized(const FieldConfig& cfg, std::uint64_t seed);

  const FieldConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  std::span<T> table(int level) {
    return std::span<T>(values_).subspan(layout_.table_offset(level), layout_.level_stride);
  }
  std::span<const T> table(int level) const {
    return std::span<const T>(values_).subspan(layout_.table_offset(level), layout_.level_stride);
  }

  /// Zeroes the weights and biases of both output layers.
  void zero_output_layers();

  template <typename U>
  FieldParamsT<U> cast() const {
    FieldParamsT<U> out(config_);
    for (std::size_t i = 0; i < values_.size(); ++i) out.values()[i] = static_cast<U>(values_[i]);
    return out;
  }

  bool all_finite() const;

 private:
  FieldConfig config_;
  ParamLayout layout_;
  std::vector<T> values_;
};

using FieldParams = FieldParamsT<float>;

inline constexpr std::array<std::uint32_t, 3> kHashPrimes{1u, 2654435761u, 805459861u};

/// Spatial hash of an integer lattice corner into a table of size 2^k.
inline std::uint32_t hash_corner(std::uint32_t x, std::uint32_t y, std::uint32_t z, std::uint32_t table_size) {
  return ((x * kHashPrimes[0]) ^ (y * kHashPrimes[1]) ^ (z * kHashPrimes[2])) & (table_size - 1);
}

/// Lattice coordinates of `x` at one level: the cube is mapped to
/// [0, resolution] per axis.
Eigen::Vector3d lattice_position(const Vec3& x, double scene_bound, int resolution);

/// Trilinearly interpolated hash features of every level, concatenated.
template <typename T>
std::vector<T> hash_encode(const Vec3& x, const FieldParamsT<T>& params);

/// [d, sin(2^j pi d), cos(2^j pi d)] for j < order.
template <typename T>
void encode_direction(const Vec3& d, int order, std::span<T> out);

struct FieldSample {
  Rgb color = Rgb::Zero();
  double density = 0.0;
};

/// Evaluates the field at one point. Throws Error(NonFinite) when the
/// parameters produce non-finite output.
template <typename T>
FieldSample field_eval(const Vec3& x, const Vec3& d, const FieldParamsT<T>& params);

/// Batched forward/backward through encoding and both MLP heads for points
/// that share a viewing direction (the samples of one ray). Instances keep
/// their scratch buffers between calls; use one per thread.
template <typename T>
class NetworkPass {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  void forward(const FieldParamsT<T>& params, std::span<const Vec3> points, const Vec3& direction);

  int size() const { return count_; }
  T density(int i) const { return sigma_[i]; }
  T color(int i, int c) const { return rgb_(i, c); }

  /// Accumulates d(loss)/d(params) into `grad` given the loss gradients
  /// with respect to the densities and colors of the last forward call.
  void backward(const FieldParamsT<T>& params, std::span<const T> d_density, const Matrix& d_color,
                std::span<T> grad);

 private:
  int count_ = 0;
  int levels_ = 0;
  std::vector<std::size_t> corner_offset_;   // count x levels x 8, absolute
  std::vector<T> corner_weight_;
  Matrix encoding_;
  std::vector<Matrix> density_acts_;  // input, hidden activations
  Matrix density_out_;
  std::vector<Matrix> color_acts_;    // input, hidden activations
  Matrix color_raw_;
  Matrix rgb_;
  std::vector<T> sigma_;
};

template <typename T>
T softplus(T x);

template <typename T>
T sigmoid(T x);

}  // namespace ssrecon::field
