#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace ssrecon {

/// Single-plane floating-point image, row-major.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, double fill = 0.0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y) { return data_[index(x, y)]; }
  double operator()(int x, int y) const { return data_[index(x, y)]; }

  /// Border-replicating accessor.
  double clamped(int x, int y) const;

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Three-plane (R, G, B) floating-point image. Samples are nominally in
/// [0, 1]; the container itself does not clamp so that metric code can work
/// on unclamped buffers.
class ImageF {
 public:
  static constexpr int kChannels = 3;

  ImageF() = default;
  ImageF(int width, int height, double fill = 0.0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y, int c) { return data_[index(x, y, c)]; }
  double operator()(int x, int y, int c) const { return data_[index(x, y, c)]; }

  std::span<double> channel(int c);
  std::span<const double> channel(int c) const;
  Plane plane(int c) const;
  void set_plane(int c, const Plane& plane);

  std::span<double> samples() noexcept { return data_; }
  std::span<const double> samples() const noexcept { return data_; }

  bool same_shape(const ImageF& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return static_cast<std::size_t>(c) * pixel_count() + static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Rec.601 luma: Y = 0.299 R + 0.587 G + 0.114 B.
Plane luminance(const ImageF& img);

/// Replaces the luminance of `img` by `target_luma`, keeping the two chroma
/// differences (R - Y, B - Y) and hence G - Y. Output is clamped to [0, 1].
ImageF replace_luminance(const ImageF& img, const Plane& current_luma, const Plane& target_luma);

ImageF clamp01(ImageF img);
ImageF flip_horizontal(const ImageF& img);
ImageF flip_vertical(const ImageF& img);

/// Reads an 8- or 16-bit PNG/JPEG (grayscale is broadcast to 3 channels).
ImageF read_image(const std::filesystem::path& path);

/// Writes with the given bit depth (8 or 16; 16 only for PNG). Samples are
/// clamped to [0, 1] and rounded.
void write_image(const std::filesystem::path& path, const ImageF& img, int bit_depth = 8);

}  // namespace ssrecon
