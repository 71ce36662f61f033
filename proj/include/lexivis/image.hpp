#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lexivis/errors.hpp"
#include "lexivis/tensor.hpp"
#include "lexivis/weights.hpp"

namespace lexivis {

// 8-bit RGB raster, row-major, interleaved.
class ImageBuffer {
 public:
  ImageBuffer() = default;

  ImageBuffer(std::size_t height, std::size_t width, std::array<std::uint8_t, 3> fill = {0, 0, 0})
      : height_(height), width_(width), pixels_(height * width * 3) {
    if (height == 0 || width == 0) throw ArgumentError("image dimensions must be positive");
    for (std::size_t i = 0; i < height * width; ++i) {
      std::copy(fill.begin(), fill.end(), pixels_.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }
  }

  ImageBuffer(std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height == 0 || width == 0) throw ArgumentError("image dimensions must be positive");
    if (pixels_.size() != height * width * 3) throw ArgumentError("pixel buffer does not match image size");
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels_[(y * width_ + x) * 3 + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels_[(y * width_ + x) * 3 + c]; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

inline constexpr std::size_t kRoiSize = kVgg19InputSize;

// Exact 224x224 copy with top-left corner (x, y).
inline ImageBuffer crop_roi(const ImageBuffer& img, std::size_t x, std::size_t y, std::size_t size = kRoiSize) {
  if (x + size > img.width() || y + size > img.height()) {
    throw ArgumentError("ROI at (" + std::to_string(x) + "," + std::to_string(y) + ") of size " +
                        std::to_string(size) + " exceeds image " + std::to_string(img.width()) + "x" +
                        std::to_string(img.height()));
  }
  ImageBuffer out(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    const auto src = img.pixels().subspan(((y + r) * img.width() + x) * 3, size * 3);
    std::copy(src.begin(), src.end(), out.pixels().begin() + static_cast<std::ptrdiff_t>(r * size * 3));
  }
  return out;
}

// Bilinear resample with pixel-center alignment.
inline ImageBuffer resize_bilinear(const ImageBuffer& img, std::size_t height, std::size_t width) {
  ImageBuffer out(height, width);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(img.height() - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(img.width() - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - wy) + bot * wy), 0L, 255L));
      }
    }
  }
  return out;
}

// Default ROI: scale the short side to 224 (aspect preserved), then center crop.
inline ImageBuffer center_roi(const ImageBuffer& img) {
  const std::size_t short_side = std::min(img.height(), img.width());
  ImageBuffer scaled = img;
  if (short_side != kRoiSize) {
    const double s = static_cast<double>(kRoiSize) / static_cast<double>(short_side);
    const auto h = std::max<std::size_t>(kRoiSize, static_cast<std::size_t>(std::lround(img.height() * s)));
    const auto w = std::max<std::size_t>(kRoiSize, static_cast<std::size_t>(std::lround(img.width() * s)));
    scaled = resize_bilinear(img, h, w);
  }
  return crop_roi(scaled, (scaled.width() - kRoiSize) / 2, (scaled.height() - kRoiSize) / 2);
}

// value = (pixel / pixel_scale - mean[c]) / std[c]; tensor channel order per `norm`.
inline Tensor to_input_tensor(const ImageBuffer& img, const Normalization& norm) {
  if (img.height() != kRoiSize || img.width() != kRoiSize) {
    throw ArgumentError("network input must be 224x224, got " + std::to_string(img.width()) + "x" +
                        std::to_string(img.height()));
  }
  Tensor t(3, kRoiSize, kRoiSize);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t src = norm.channel_order == ChannelOrder::rgb ? c : 2 - c;
    const float mean = norm.mean[c];
    const float sd = norm.std[c];
    for (std::size_t y = 0; y < kRoiSize; ++y) {
      for (std::size_t x = 0; x < kRoiSize; ++x) {
        t.at(c, y, x) = (static_cast<float>(img.at(y, x, src)) / norm.pixel_scale - mean) / sd;
      }
    }
  }
  return t;
}

}  // namespace lexivis
