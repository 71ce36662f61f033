#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lexivis/errors.hpp"

namespace lexivis {

// Rank-3 float array, channel-major then row-major: (C, H, W).
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
      : channels_(channels), height_(height), width_(width) {
    if (channels == 0 || height == 0 || width == 0) {
      throw ConfigError("tensor dimensions must be positive");
    }
    data_.assign(channels * height * width, fill);
  }

  Tensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (channels == 0 || height == 0 || width == 0) {
      throw ConfigError("tensor dimensions must be positive");
    }
    if (data_.size() != channels * height * width) {
      throw ConfigError("tensor data length " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(channels) + "x" + std::to_string(height) + "x" +
                        std::to_string(width));
    }
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> channel(std::size_t c) const {
    return std::span<const float>(data_).subspan(c * plane_size(), plane_size());
  }
  std::span<float> channel(std::size_t c) {
    return std::span<float>(data_).subspan(c * plane_size(), plane_size());
  }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  bool same_shape(const Tensor& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

// Convolution kernels laid out [out, in, kh, kw] plus one bias per output.
struct ConvWeights {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::vector<float> weights;
  std::vector<float> bias;

  std::size_t fan_in() const noexcept { return in_channels * kernel_h * kernel_w; }

  void validate() const {
    if (out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0) {
      throw ConfigError("convolution dimensions must be positive");
    }
    if (weights.size() != out_channels * fan_in()) {
      throw ConfigError("convolution weights length " + std::to_string(weights.size()) +
                        " does not match declared shape");
    }
    if (bias.size() != out_channels) {
      throw ConfigError("convolution bias length " + std::to_string(bias.size()) +
                        " does not match out_channels " + std::to_string(out_channels));
    }
  }

  float weight(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
    return weights[((o * in_channels + i) * kernel_h + y) * kernel_w + x];
  }
};

struct ConvGeometry {
  std::size_t out_h = 0;
  std::size_t out_w = 0;
};

namespace detail {

inline ConvGeometry conv_geometry(const Tensor& input, const ConvWeights& w, std::size_t stride,
                                  std::size_t padding) {
  w.validate();
  if (input.channels() != w.in_channels) {
    throw ConfigError("conv2d channel mismatch: input has " + std::to_string(input.channels()) +
                      ", weights expect " + std::to_string(w.in_channels));
  }
  if (stride == 0) throw ConfigError("conv2d stride must be positive");
  const auto padded_h = static_cast<long long>(input.height() + 2 * padding);
  const auto padded_w = static_cast<long long>(input.width() + 2 * padding);
  const long long oh = (padded_h - static_cast<long long>(w.kernel_h)) / static_cast<long long>(stride) + 1;
  const long long ow = (padded_w - static_cast<long long>(w.kernel_w)) / static_cast<long long>(stride) + 1;
  if (padded_h < static_cast<long long>(w.kernel_h) || padded_w < static_cast<long long>(w.kernel_w) ||
      oh <= 0 || ow <= 0) {
    throw ConfigError("conv2d output dimension is not positive");
  }
  return {static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)};
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs body(begin, end) over [0, n) split into contiguous chunks.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&body, begin, end] { body(begin, end); });
  }
}

constexpr std::size_t kOutBlock = 4;
constexpr std::size_t kPixBlock = 8;
constexpr std::size_t kTile = 64;

// acc[o][t] += sum_k w[k][o] * col[k][t]; products of two floats are exact in
// double, so the result does not depend on FMA contraction.
inline void conv_micro_kernel(std::size_t depth, const double* w, const float* col,
                              double (&acc)[kOutBlock][kPixBlock]) {
  for (std::size_t k = 0; k < depth; ++k) {
    const float* c = col + k * kTile;
    double x[kPixBlock];
    for (std::size_t t = 0; t < kPixBlock; ++t) x[t] = static_cast<double>(c[t]);
    const double* wk = w + k * kOutBlock;
    for (std::size_t o = 0; o < kOutBlock; ++o) {
      const double wo = wk[o];
      for (std::size_t t = 0; t < kPixBlock; ++t) acc[o][t] += wo * x[t];
    }
  }
}

}  // namespace detail

// Direct loop convolution with zero padding; the oracle for conv2d.
inline Tensor conv2d_reference(const Tensor& input, const ConvWeights& w, std::size_t stride,
                               std::size_t padding) {
  const auto g = detail::conv_geometry(input, w, stride, padding);
  Tensor out(w.out_channels, g.out_h, g.out_w);
  const auto pad = static_cast<long long>(padding);
  for (std::size_t o = 0; o < w.out_channels; ++o) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        double sum = 0.0;
        for (std::size_t c = 0; c < w.in_channels; ++c) {
          for (std::size_t ky = 0; ky < w.kernel_h; ++ky) {
            const long long iy = static_cast<long long>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<long long>(input.height())) continue;
            for (std::size_t kx = 0; kx < w.kernel_w; ++kx) {
              const long long ix = static_cast<long long>(ox * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<long long>(input.width())) continue;
              sum += static_cast<double>(w.weight(o, c, ky, kx)) *
                     static_cast<double>(input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)));
            }
          }
        }
        out.at(o, oy, ox) = static_cast<float>(sum + static_cast<double>(w.bias[o]));
      }
    }
  }
  return out;
}

// Patch-matrix convolution: output pixels are processed in tiles of 64, each
// tile is unrolled into a [fan_in x 64] column block, and a register-blocked
// kernel computes 4 output channels x 8 pixels at a time with double
// accumulators. Every output value is summed in the same order regardless of
// the thread count, so results are bitwise independent of `threads`.
inline Tensor conv2d(const Tensor& input, const ConvWeights& w, std::size_t stride,
                     std::size_t padding, unsigned threads = 0) {
  using namespace detail;
  const auto g = conv_geometry(input, w, stride, padding);
  const std::size_t depth = w.fan_in();
  const std::size_t pixels = g.out_h * g.out_w;
  const std::size_t out_blocks = (w.out_channels + kOutBlock - 1) / kOutBlock;

  // [block][k][o] doubles, zero-padded past out_channels.
  std::vector<double> packed(out_blocks * depth * kOutBlock, 0.0);
  for (std::size_t o = 0; o < w.out_channels; ++o) {
    const std::size_t b = o / kOutBlock;
    const std::size_t lane = o % kOutBlock;
    for (std::size_t k = 0; k < depth; ++k) {
      packed[(b * depth + k) * kOutBlock + lane] = static_cast<double>(w.weights[o * depth + k]);
    }
  }

  Tensor out(w.out_channels, g.out_h, g.out_w);
  const std::size_t tiles = (pixels + kTile - 1) / kTile;
  const auto in_h = static_cast<long long>(input.height());
  const auto in_w = static_cast<long long>(input.width());
  const auto pad = static_cast<long long>(padding);

  parallel_for(tiles, resolve_threads(threads), [&](std::size_t tile_begin, std::size_t tile_end) {
    std::vector<float> col(depth * kTile);
    long long base_y[kTile];
    long long base_x[kTile];
    for (std::size_t tile = tile_begin; tile < tile_end; ++tile) {
      const std::size_t p0 = tile * kTile;
      const std::size_t count = std::min(kTile, pixels - p0);
      for (std::size_t t = 0; t < kTile; ++t) {
        const std::size_t p = p0 + std::min(t, count - 1);
        base_y[t] = static_cast<long long>((p / g.out_w) * stride) - pad;
        base_x[t] = static_cast<long long>((p % g.out_w) * stride) - pad;
      }
      std::size_t k = 0;
      for (std::size_t c = 0; c < w.in_channels; ++c) {
        const auto plane = input.channel(c);
        for (std::size_t ky = 0; ky < w.kernel_h; ++ky) {
          for (std::size_t kx = 0; kx < w.kernel_w; ++kx, ++k) {
            float* row = col.data() + k * kTile;
            for (std::size_t t = 0; t < kTile; ++t) {
              const long long iy = base_y[t] + static_cast<long long>(ky);
              const long long ix = base_x[t] + static_cast<long long>(kx);
              const bool inside = t < count && iy >= 0 && iy < in_h && ix >= 0 && ix < in_w;
              row[t] = inside ? plane[static_cast<std::size_t>(iy * in_w + ix)] : 0.0f;
            }
          }
        }
      }
      for (std::size_t b = 0; b < out_blocks; ++b) {
        const double* wb = packed.data() + b * depth * kOutBlock;
        for (std::size_t sub = 0; sub < kTile && sub < count; sub += kPixBlock) {
          double acc[kOutBlock][kPixBlock] = {};
          conv_micro_kernel(depth, wb, col.data() + sub, acc);
          for (std::size_t lane = 0; lane < kOutBlock; ++lane) {
            const std::size_t o = b * kOutBlock + lane;
            if (o >= w.out_channels) break;
            auto dst = out.channel(o);
            const double bias = static_cast<double>(w.bias[o]);
            for (std::size_t t = 0; t < kPixBlock && sub + t < count; ++t) {
              dst[p0 + sub + t] = static_cast<float>(acc[lane][t] + bias);
            }
          }
        }
      }
    }
  });
  return out;
}

inline Tensor relu(Tensor input) {
  for (float& v : input.data()) v = v > 0.0f ? v : 0.0f;
  return input;
}

// 2x2 window, stride 2.
inline Tensor maxpool2(const Tensor& input) {
  if (input.height() % 2 != 0 || input.width() % 2 != 0) {
    throw ConfigError("maxpool2 requires even spatial dimensions, got " +
                      std::to_string(input.height()) + "x" + std::to_string(input.width()));
  }
  Tensor out(input.channels(), input.height() / 2, input.width() / 2);
  for (std::size_t c = 0; c < input.channels(); ++c) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t x = 0; x < out.width(); ++x) {
        out.at(c, y, x) = std::max({input.at(c, 2 * y, 2 * x), input.at(c, 2 * y, 2 * x + 1),
                                    input.at(c, 2 * y + 1, 2 * x), input.at(c, 2 * y + 1, 2 * x + 1)});
      }
    }
  }
  return out;
}

// 1-based rank ceil(q*N), with a relative slack of 1e-9 so that q*N values
// that are integers in exact arithmetic are not pushed up by rounding
// (0.9 * 70 evaluates to 63.000000000000007 in binary floating point).
inline std::size_t nearest_rank(std::size_t n, double q) {
  const double r = q * static_cast<double>(n);
  const double slack = 1e-9 * std::max(1.0, r);
  auto rank = static_cast<std::size_t>(std::ceil(r - slack));
  return std::clamp<std::size_t>(rank, 1, n);
}

// Element at 1-based index ceil(q*N) of the ascending sort.
inline float quantile_nearest_rank(std::span<const float> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of an empty sequence");
  if (!(q > 0.0 && q <= 1.0)) throw ArgumentError("quantile level must lie in (0, 1]");
  std::vector<float> scratch(values.begin(), values.end());
  const std::size_t idx = nearest_rank(scratch.size(), q) - 1;
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(idx), scratch.end());
  return scratch[idx];
}

}  // namespace lexivis
