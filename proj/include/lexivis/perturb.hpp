#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lexivis/errors.hpp"
#include "lexivis/image.hpp"

namespace lexivis {

enum class PerturbationKind { saltpepper, gaussian, erode, dilate };

inline std::string to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::saltpepper: return "saltpepper";
    case PerturbationKind::gaussian: return "gaussian";
    case PerturbationKind::erode: return "erode";
    case PerturbationKind::dilate: return "dilate";
  }
  return "?";
}

inline PerturbationKind parse_perturbation_kind(const std::string& s) {
  if (s == "saltpepper") return PerturbationKind::saltpepper;
  if (s == "gaussian") return PerturbationKind::gaussian;
  if (s == "erode") return PerturbationKind::erode;
  if (s == "dilate") return PerturbationKind::dilate;
  throw ArgumentError("unknown perturbation kind '" + s + "' (saltpepper|gaussian|erode|dilate)");
}

// level is the replacement proportion for saltpepper, the odd window size otherwise.
struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::saltpepper;
  double level = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (kind == PerturbationKind::saltpepper) {
      if (!(level >= 0.0 && level <= 1.0)) throw ArgumentError("salt-and-pepper proportion must lie in [0, 1]");
      return;
    }
    if (level < 1.0 || level != std::floor(level) || static_cast<long long>(level) % 2 == 0) {
      throw ArgumentError(to_string(kind) + " size must be an odd integer >= 1");
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(level); }

  bool is_identity() const { return kind == PerturbationKind::saltpepper ? level == 0.0 : level == 1.0; }

  std::string label() const {
    std::ostringstream os;
    os << to_string(kind) << ':' << level;
    return os.str();
  }
};

inline double identity_level(PerturbationKind kind) { return kind == PerturbationKind::saltpepper ? 0.0 : 1.0; }

// Each pixel is replaced with probability p by black or white (1/2 each).
// Uses mt19937_64 with hand-rolled draws so the output is identical across
// standard library implementations.
inline ImageBuffer salt_pepper(const ImageBuffer& img, double p, std::uint64_t seed) {
  PerturbationSpec{PerturbationKind::saltpepper, p, seed}.validate();
  ImageBuffer out = img;
  std::mt19937_64 rng(seed);
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const bool white = (rng() >> 63) != 0;
      if (u < p) {
        const std::uint8_t v = white ? 255 : 0;
        for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = v;
      }
    }
  }
  return out;
}

namespace detail {

inline void require_odd(std::size_t k, const char* what) {
  if (k == 0 || k % 2 == 0) throw ArgumentError(std::string(what) + " size must be odd and >= 1");
}

inline std::size_t clamp_index(long long i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long long>(i, 0, static_cast<long long>(n) - 1));
}

template <typename Select>
ImageBuffer window_filter(const ImageBuffer& img, std::size_t s, Select select) {
  // Square windows are separable for min and max.
  const auto r = static_cast<long long>(s / 2);
  ImageBuffer horiz = img;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        std::uint8_t v = img.at(y, x, c);
        for (long long d = -r; d <= r; ++d) {
          v = select(v, img.at(y, clamp_index(static_cast<long long>(x) + d, img.width()), c));
        }
        horiz.at(y, x, c) = v;
      }
    }
  }
  ImageBuffer out = horiz;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        std::uint8_t v = horiz.at(y, x, c);
        for (long long d = -r; d <= r; ++d) {
          v = select(v, horiz.at(clamp_index(static_cast<long long>(y) + d, img.height()), x, c));
        }
        out.at(y, x, c) = v;
      }
    }
  }
  return out;
}

}  // namespace detail

// Normalized 1-D Gaussian taps with sigma = k / 6.
inline std::vector<double> gaussian_taps(std::size_t k) {
  detail::require_odd(k, "gaussian kernel");
  if (k == 1) return {1.0};
  const double sigma = static_cast<double>(k) / 6.0;
  const auto r = static_cast<long long>(k / 2);
  std::vector<double> taps;
  double sum = 0.0;
  for (long long i = -r; i <= r; ++i) {
    taps.push_back(std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma)));
    sum += taps.back();
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// k x k Gaussian (outer product of gaussian_taps), clamp-to-edge, rounded once at the end.
inline ImageBuffer gaussian_blur(const ImageBuffer& img, std::size_t k) {
  const auto taps = gaussian_taps(k);
  if (k == 1) return img;
  const auto r = static_cast<long long>(k / 2);
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  std::vector<double> horiz(h * w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (long long d = -r; d <= r; ++d) {
          acc += taps[static_cast<std::size_t>(d + r)] *
                 img.at(y, detail::clamp_index(static_cast<long long>(x) + d, w), c);
        }
        horiz[(y * w + x) * 3 + c] = acc;
      }
    }
  }
  ImageBuffer out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (long long d = -r; d <= r; ++d) {
          acc += taps[static_cast<std::size_t>(d + r)] *
                 horiz[(detail::clamp_index(static_cast<long long>(y) + d, h) * w + x) * 3 + c];
        }
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
      }
    }
  }
  return out;
}

// Grayscale morphology per channel with an s x s square, clamp-to-edge.
inline ImageBuffer erode(const ImageBuffer& img, std::size_t s) {
  detail::require_odd(s, "erosion");
  if (s == 1) return img;
  return detail::window_filter(img, s, [](std::uint8_t a, std::uint8_t b) { return std::min(a, b); });
}

inline ImageBuffer dilate(const ImageBuffer& img, std::size_t s) {
  detail::require_odd(s, "dilation");
  if (s == 1) return img;
  return detail::window_filter(img, s, [](std::uint8_t a, std::uint8_t b) { return std::max(a, b); });
}

inline ImageBuffer apply_perturbation(const ImageBuffer& img, const PerturbationSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case PerturbationKind::saltpepper: return salt_pepper(img, spec.level, spec.seed);
    case PerturbationKind::gaussian: return gaussian_blur(img, spec.size());
    case PerturbationKind::erode: return erode(img, spec.size());
    case PerturbationKind::dilate: return dilate(img, spec.size());
  }
  return img;
}

}  // namespace lexivis
