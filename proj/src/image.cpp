#include "ssrecon/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ssrecon/error.hpp"

namespace ssrecon {

Plane::Plane(int width, int height, double fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

double Plane::clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return (*this)(x, y);
}

ImageF::ImageF(int width, int height, double fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * height * kChannels, fill) {}

std::span<double> ImageF::channel(int c) {
  return std::span<double>(data_).subspan(c * pixel_count(), pixel_count());
}

std::span<const double> ImageF::channel(int c) const {
  return std::span<const double>(data_).subspan(c * pixel_count(), pixel_count());
}

Plane ImageF::plane(int c) const {
  Plane p(width_, height_);
  std::ranges::copy(channel(c), p.values().begin());
  return p;
}

void ImageF::set_plane(int c, const Plane& plane) {
  if (plane.width() != width_ || plane.height() != height_) {
    throw Error(ErrorKind::ShapeMismatch, "plane does not match image dimensions");
  }
  std::ranges::copy(plane.values(), channel(c).begin());
}

Plane luminance(const ImageF& img) {
  Plane y(img.width(), img.height());
  auto r = img.channel(0);
  auto g = img.channel(1);
  auto b = img.channel(2);
  auto out = y.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
  }
  return y;
}

ImageF replace_luminance(const ImageF& img, const Plane& current_luma, const Plane& target_luma) {
  ImageF out = img;
  auto cur = current_luma.values();
  auto tgt = target_luma.values();
  for (int c = 0; c < ImageF::kChannels; ++c) {
    auto ch = out.channel(c);
    for (std::size_t i = 0; i < ch.size(); ++i) {
      ch[i] = std::clamp(ch[i] + (tgt[i] - cur[i]), 0.0, 1.0);
    }
  }
  return out;
}

ImageF clamp01(ImageF img) {
  for (double& s : img.samples()) s = std::clamp(s, 0.0, 1.0);
  return img;
}

ImageF flip_horizontal(const ImageF& img) {
  ImageF out(img.width(), img.height());
  for (int c = 0; c < ImageF::kChannels; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out(img.width() - 1 - x, y, c) = img(x, y, c);
  return out;
}

ImageF flip_vertical(const ImageF& img) {
  ImageF out(img.width(), img.height());
  for (int c = 0; c < ImageF::kChannels; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out(x, img.height() - 1 - y, c) = img(x, y, c);
  return out;
}

ImageF read_image(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_COLOR);
  if (raw.empty()) throw Error(ErrorKind::Io, "cannot read image '" + path.string() + "'");
  double scale = 1.0;
  switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw Error(ErrorKind::Io, "unsupported sample depth in '" + path.string() + "'");
  }
  cv::Mat bgr;
  raw.convertTo(bgr, CV_64FC3, scale);
  ImageF img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3d>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img(x, y, 0) = row[x][2];
      img(x, y, 1) = row[x][1];
      img(x, y, 2) = row[x][0];
    }
  }
  return img;
}

void write_image(const std::filesystem::path& path, const ImageF& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw Error(ErrorKind::Config, "bit depth must be 8 or 16");
  }
  const double full = bit_depth == 8 ? 255.0 : 65535.0;
  cv::Mat out(img.height(), img.width(), bit_depth == 8 ? CV_8UC3 : CV_16UC3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::round(std::clamp(img(x, y, c), 0.0, 1.0) * full);
        if (bit_depth == 8) {
          out.at<cv::Vec3b>(y, x)[2 - c] = static_cast<std::uint8_t>(v);
        } else {
          out.at<cv::Vec3w>(y, x)[2 - c] = static_cast<std::uint16_t>(v);
        }
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), out);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::Io, "cannot write '" + path.string() + "': " + e.what());
  }
  if (!ok) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
}

}  // namespace ssrecon
