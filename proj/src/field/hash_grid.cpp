#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ssrecon/error.hpp"
#include "ssrecon/field/field.hpp"

namespace ssrecon::field {

double HashGridConfig::growth() const {
  if (growth_factor > 0.0) return growth_factor;
  if (levels <= 1) return 2.0;
  return std::exp((std::log(double(kDefaultFinestResolution)) - std::log(double(base_resolution))) /
                  double(levels - 1));
}

int HashGridConfig::resolution(int level) const {
  // The epsilon keeps e.g. 16 * 2^(4/4 * ...) from flooring to 255.
  return static_cast<int>(std::floor(base_resolution * std::pow(growth(), level) + 1e-6));
}

void HashGridConfig::validate() const {
  if (levels < 1) throw Error(ErrorKind::Config, "hash grid needs at least one level");
  if (features_per_level < 1) throw Error(ErrorKind::Config, "features_per_level must be >= 1");
  if (table_size_log2 < 4 || table_size_log2 > 24) throw Error(ErrorKind::Config, "table_size_log2 must be in [4, 24]");
  if (base_resolution < 2) throw Error(ErrorKind::Config, "base_resolution must be >= 2");
  if (!(growth() > 1.0)) throw Error(ErrorKind::Config, "growth_factor must be > 1");
  if (!(scene_bound > 0.0)) throw Error(ErrorKind::Config, "scene_bound must be positive");
}

void MlpConfig::validate() const {
  if (hidden_width < 1 || hidden_layers < 0) throw Error(ErrorKind::Config, "invalid MLP hidden shape");
  if (geo_features < 0) throw Error(ErrorKind::Config, "geo_features must be >= 0");
  if (direction_order < 0) throw Error(ErrorKind::Config, "direction_order must be >= 0");
}

ParamLayout::ParamLayout(const FieldConfig& cfg) {
  level_stride = static_cast<std::size_t>(cfg.grid.table_size()) * cfg.grid.features_per_level;
  tables_size = level_stride * cfg.grid.levels;
  std::size_t offset = tables_size;
  auto add_stack = [&](std::vector<LayerShape>& stack, int in, int out) {
    int width = in;
    for (int k = 0; k < cfg.mlp.hidden_layers; ++k) {
      stack.push_back({width, cfg.mlp.hidden_width, offset, offset + std::size_t(width) * cfg.mlp.hidden_width});
      offset += std::size_t(width) * cfg.mlp.hidden_width + cfg.mlp.hidden_width;
      width = cfg.mlp.hidden_width;
    }
    stack.push_back({width, out, offset, offset + std::size_t(width) * out});
    offset += std::size_t(width) * out + out;
  };
  add_stack(density_layers, cfg.grid.feature_dim(), 1 + cfg.mlp.geo_features);
  add_stack(color_layers, cfg.mlp.geo_features + cfg.mlp.direction_dim(), 3);
  total = offset;
}

template <typename T>
FieldParamsT<T>::FieldParamsT(const FieldConfig& cfg) : config_(cfg), layout_(cfg), values_(layout_.total, T(0)) {
  cfg.validate();
}

template <typename T>
FieldParamsT<T> FieldParamsT<T>::initialized(const FieldConfig& cfg, std::uint64_t seed) {
  FieldParamsT p(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> table_init(-1e-4, 1e-4);
  for (std::size_t i = 0; i < p.layout_.tables_size; ++i) p.values_[i] = static_cast<T>(table_init(rng));
  auto init_stack = [&](const std::vector<LayerShape>& stack) {
    for (const LayerShape& l : stack) {
      const double bound = std::sqrt(6.0 / (l.in + l.out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t i = 0; i < std::size_t(l.in) * l.out; ++i) p.values_[l.weight_offset + i] = static_cast<T>(dist(rng));
    }
  };
  init_stack(p.layout_.density_layers);
  init_stack(p.layout_.color_layers);
  return p;
}

template <typename T>
void FieldParamsT<T>::zero_output_layers() {
  for (const auto* stack : {&layout_.density_layers, &layout_.color_layers}) {
    const LayerShape& l = stack->back();
    std::fill_n(values_.begin() + l.weight_offset, std::size_t(l.in) * l.out + l.out, T(0));
  }
}

template <typename T>
bool FieldParamsT<T>::all_finite() const {
  return std::ranges::all_of(values_, [](T v) { return std::isfinite(v); });
}

Eigen::Vector3d lattice_position(const Vec3& x, double scene_bound, int resolution) {
  Eigen::Vector3d u = (x.array() + scene_bound) / (2.0 * scene_bound);
  return u.cwiseMax(0.0).cwiseMin(1.0) * double(resolution);
}

template <typename T>
T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void encode_direction(const Vec3& d, int order, std::span<T> out) {
  for (int a = 0; a < 3; ++a) out[a] = static_cast<T>(d[a]);
  double freq = std::numbers::pi;
  for (int j = 0; j < order; ++j) {
    for (int a = 0; a < 3; ++a) {
      out[3 + 6 * j + a] = static_cast<T>(std::sin(freq * d[a]));
      out[6 + 6 * j + a] = static_cast<T>(std::cos(freq * d[a]));
    }
    freq *= 2.0;
  }
}

template <typename T>
void NetworkPass<T>::forward(const FieldParamsT<T>& params, std::span<const Vec3> points, const Vec3& direction) {
  const FieldConfig& cfg = params.config();
  const ParamLayout& layout = params.layout();
  const int n = static_cast<int>(points.size());
  const int L = cfg.grid.levels;
  const int F = cfg.grid.features_per_level;
  const std::uint32_t table_size = cfg.grid.table_size();
  const auto values = params.values();
  count_ = n;
  levels_ = L;

  corner_offset_.resize(std::size_t(n) * L * 8);
  corner_weight_.resize(std::size_t(n) * L * 8);
  encoding_.setZero(n, L * F);
  for (int level = 0; level < L; ++level) {
    const int res = cfg.grid.resolution(level);
    const std::size_t base = layout.table_offset(level);
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d pos = lattice_position(points[i], cfg.grid.scene_bound, res);
      std::array<std::uint32_t, 3> cell{};
      std::array<double, 3> frac{};
      for (int a = 0; a < 3; ++a) {
        const int c = std::min(static_cast<int>(std::floor(pos[a])), res - 1);
        cell[a] = static_cast<std::uint32_t>(c);
        frac[a] = pos[a] - c;
      }
      const std::size_t slot = (std::size_t(i) * L + level) * 8;
      for (int corner = 0; corner < 8; ++corner) {
        double w = 1.0;
        std::array<std::uint32_t, 3> idx{};
        for (int a = 0; a < 3; ++a) {
          const bool upper = (corner >> a) & 1;
          idx[a] = cell[a] + (upper ? 1u : 0u);
          w *= upper ? frac[a] : 1.0 - frac[a];
        }
        const std::size_t offset = base + std::size_t(hash_corner(idx[0], idx[1], idx[2], table_size)) * F;
        corner_offset_[slot + corner] = offset;
        corner_weight_[slot + corner] = static_cast<T>(w);
        for (int f = 0; f < F; ++f) encoding_(i, level * F + f) += static_cast<T>(w) * values[offset + f];
      }
    }
  }

  using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
  auto run_stack = [&](const std::vector<LayerShape>& stack, std::vector<Matrix>& acts, Matrix& out) {
    acts.resize(stack.size());
    for (std::size_t k = 0; k < stack.size(); ++k) {
      const LayerShape& l = stack[k];
      Eigen::Map<const Matrix> w(values.data() + l.weight_offset, l.in, l.out);
      Eigen::Map<const RowVector> b(values.data() + l.bias_offset, l.out);
      Matrix& target = k + 1 < stack.size() ? acts[k + 1] : out;
      target.noalias() = acts[k] * w;
      target.rowwise() += b;
      if (k + 1 < stack.size()) target = target.cwiseMax(T(0));
    }
  };

  density_acts_.resize(layout.density_layers.size());
  density_acts_[0] = encoding_;
  run_stack(layout.density_layers, density_acts_, density_out_);
  sigma_.resize(n);
  for (int i = 0; i < n; ++i) sigma_[i] = softplus(density_out_(i, 0));

  const int G = cfg.mlp.geo_features;
  const int D = cfg.mlp.direction_dim();
  std::vector<T> dir(D);
  encode_direction<T>(direction, cfg.mlp.direction_order, dir);
  color_acts_.resize(layout.color_layers.size());
  Matrix& cin = color_acts_[0];
  cin.resize(n, G + D);
  if (G > 0) cin.leftCols(G) = density_out_.rightCols(G);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < D; ++j) cin(i, G + j) = dir[j];
  run_stack(layout.color_layers, color_acts_, color_raw_);
  rgb_ = color_raw_.unaryExpr([](T v) { return sigmoid(v); });
}

template <typename T>
void NetworkPass<T>::backward(const FieldParamsT<T>& params, std::span<const T> d_density, const Matrix& d_color,
                              std::span<T> grad) {
  const FieldConfig& cfg = params.config();
  const ParamLayout& layout = params.layout();
  const auto values = params.values();
  const int n = count_;
  const int G = cfg.mlp.geo_features;
  const int F = cfg.grid.features_per_level;

  // Backpropagates through a stack; returns the gradient w.r.t. its input.
  auto back_stack = [&](const std::vector<LayerShape>& stack, const std::vector<Matrix>& acts, Matrix d_out) {
    for (std::size_t k = stack.size(); k-- > 0;) {
      const LayerShape& l = stack[k];
      Eigen::Map<const Matrix> w(values.data() + l.weight_offset, l.in, l.out);
      Eigen::Map<Matrix> gw(grad.data() + l.weight_offset, l.in, l.out);
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(grad.data() + l.bias_offset, l.out);
      gw.noalias() += acts[k].transpose() * d_out;
      gb += d_out.colwise().sum();
      Matrix d_in = d_out * w.transpose();
      if (k > 0) d_in = d_in.cwiseProduct(acts[k].unaryExpr([](T a) { return a > T(0) ? T(1) : T(0); }));
      d_out = std::move(d_in);
    }
    return d_out;
  };

  Matrix d_color_raw = d_color.cwiseProduct(rgb_.cwiseProduct((Matrix::Ones(n, 3) - rgb_)));
  const Matrix d_color_in = back_stack(layout.color_layers, color_acts_, std::move(d_color_raw));

  Matrix d_density_out(n, 1 + G);
  for (int i = 0; i < n; ++i) d_density_out(i, 0) = d_density[i] * sigmoid(density_out_(i, 0));
  if (G > 0) d_density_out.rightCols(G) = d_color_in.leftCols(G);
  const Matrix d_encoding = back_stack(layout.density_layers, density_acts_, std::move(d_density_out));

  for (int i = 0; i < n; ++i) {
    for (int level = 0; level < levels_; ++level) {
      const std::size_t slot = (std::size_t(i) * levels_ + level) * 8;
      for (int corner = 0; corner < 8; ++corner) {
        const T w = corner_weight_[slot + corner];
        if (w == T(0)) continue;
        const std::size_t offset = corner_offset_[slot + corner];
        for (int f = 0; f < F; ++f) grad[offset + f] += w * d_encoding(i, level * F + f);
      }
    }
  }
}

template <typename T>
std::vector<T> hash_encode(const Vec3& x, const FieldParamsT<T>& params) {
  const HashGridConfig& grid = params.config().grid;
  const int F = grid.features_per_level;
  std::vector<T> out(grid.feature_dim(), T(0));
  for (int level = 0; level < grid.levels; ++level) {
    const int res = grid.resolution(level);
    const Eigen::Vector3d pos = lattice_position(x, grid.scene_bound, res);
    const auto table = params.table(level);
    for (int corner = 0; corner < 8; ++corner) {
      double w = 1.0;
      std::array<std::uint32_t, 3> idx{};
      for (int a = 0; a < 3; ++a) {
        const int c = std::min(static_cast<int>(std::floor(pos[a])), res - 1);
        const double frac = pos[a] - c;
        const bool upper = (corner >> a) & 1;
        idx[a] = static_cast<std::uint32_t>(c) + (upper ? 1u : 0u);
        w *= upper ? frac : 1.0 - frac;
      }
      const std::size_t offset = std::size_t(hash_corner(idx[0], idx[1], idx[2], grid.table_size())) * F;
      for (int f = 0; f < F; ++f) out[level * F + f] += static_cast<T>(w) * table[offset + f];
    }
  }
  return out;
}

template <typename T>
FieldSample field_eval(const Vec3& x, const Vec3& d, const FieldParamsT<T>& params) {
  NetworkPass<T> pass;
  const Vec3 point = x;
  pass.forward(params, std::span<const Vec3>(&point, 1), d);
  FieldSample s;
  s.density = static_cast<double>(pass.density(0));
  for (int c = 0; c < 3; ++c) s.color[c] = static_cast<double>(pass.color(0, c));
  if (!std::isfinite(s.density) || !s.color.allFinite()) {
    throw Error(ErrorKind::NonFinite, "field evaluation produced non-finite output");
  }
  return s;
}

template class FieldParamsT<float>;
template class FieldParamsT<double>;
template class NetworkPass<float>;
template class NetworkPass<double>;
template float softplus(float);
template double softplus(double);
template float sigmoid(float);
template double sigmoid(double);
template void encode_direction<float>(const Vec3&, int, std::span<float>);
template void encode_direction<double>(const Vec3&, int, std::span<double>);
template std::vector<float> hash_encode(const Vec3&, const FieldParamsT<float>&);
template std::vector<double> hash_encode(const Vec3&, const FieldParamsT<double>&);
template FieldSample field_eval(const Vec3&, const Vec3&, const FieldParamsT<float>&);
template FieldSample field_eval(const Vec3&, const Vec3&, const FieldParamsT<double>&);

}  // namespace ssrecon::field
