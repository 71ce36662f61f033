#pragma once

#include <cstdint>

namespace lexivis {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Exact multiple of 2^-24 in [0, 1).
  double next_unit() { return static_cast<double>(next() >> 40) * 0x1.0p-24; }

 private:
  std::uint64_t state_;
};

}  // namespace lexivis
