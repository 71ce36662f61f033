#pragma once

// Deterministic stand-in for pretrained VGG-19 weights.
//
// Every value comes from a splitmix64 stream and uses only operations that are
// correctly rounded under IEEE-754 (integer shifts, exact scaling by 2^-24,
// sqrt, one multiply, one cast to float), so any language reproduces the same
// bytes. tools/export/make_fixtures.py implements the same generator.
//
//   stream(seed, layer, part) starts from  seed * 1000003 + layer * 2 + part
//   (mod 2^64), layer is 1-based, part 0 = weights, 1 = bias
//   u      = (next() >> 40) * 2^-24                      in [0, 1)
//   weight = float((2u - 1) * sqrt(6 / fan_in))          Kaiming-uniform
//   bias   = float((2u - 1) * (1 / sqrt(fan_in)))

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "lexivis/rng.hpp"
#include "lexivis/weights.hpp"

namespace lexivis {

inline std::vector<float> synthetic_stream(std::uint64_t seed, std::size_t layer, unsigned part,
                                           std::size_t count, double bound) {
  SplitMix64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(layer) * 2ULL + part);
  std::vector<float> out(count);
  for (auto& v : out) v = static_cast<float>((2.0 * rng.next_unit() - 1.0) * bound);
  return out;
}

// `layer` is the 1-based conv index.
inline ConvWeights synthetic_conv_weights(std::uint64_t seed, std::size_t layer, std::size_t in_channels,
                                          std::size_t out_channels, std::size_t kernel = 3) {
  ConvWeights w;
  w.out_channels = out_channels;
  w.in_channels = in_channels;
  w.kernel_h = kernel;
  w.kernel_w = kernel;
  const auto fan_in = static_cast<double>(in_channels * kernel * kernel);
  w.weights = synthetic_stream(seed, layer, 0, out_channels * in_channels * kernel * kernel,
                               std::sqrt(6.0 / fan_in));
  w.bias = synthetic_stream(seed, layer, 1, out_channels, 1.0 / std::sqrt(fan_in));
  return w;
}

// Writes a complete vgg19 manifest plus blobs into `dir`; returns the manifest path.
inline fs::path export_synthetic_vgg19(const fs::path& dir, std::uint64_t seed,
                                       const Normalization& norm = {}) {
  fs::create_directories(dir);
  WeightManifest m;
  m.arch_name = "vgg19";
  m.normalization = norm;
  std::size_t in = 3;
  std::size_t block = 1;
  std::size_t within = 1;
  for (std::size_t i = 1; i <= kVgg19Channels.size(); ++i) {
    const std::size_t out = kVgg19Channels[i - 1];
    const std::string suffix = std::to_string(block) + "_" + std::to_string(within);
    const auto w = synthetic_conv_weights(seed, i, in, out);

    LayerSpec conv;
    conv.name = "conv" + suffix;
    conv.kind = LayerKind::conv;
    conv.in_channels = in;
    conv.out_channels = out;
    conv.weights.path = dir / (conv.name + ".weight.bin");
    conv.weights.shape = {out, in, 3, 3};
    conv.bias.path = dir / (conv.name + ".bias.bin");
    conv.bias.shape = {out};
    const auto wbytes = encode_f32le(w.weights);
    const auto bbytes = encode_f32le(w.bias);
    write_file_bytes(conv.weights.path, wbytes);
    write_file_bytes(conv.bias.path, bbytes);
    conv.weights.sha256 = sha256_hex(wbytes);
    conv.bias.sha256 = sha256_hex(bbytes);
    m.layers.push_back(conv);

    LayerSpec act;
    act.name = "relu" + suffix;
    act.kind = LayerKind::relu;
    m.layers.push_back(act);
    ++within;

    if (std::find(kVgg19PoolAfter.begin(), kVgg19PoolAfter.end(), i) != kVgg19PoolAfter.end()) {
      LayerSpec pool;
      pool.name = "pool" + std::to_string(block);
      pool.kind = LayerKind::maxpool;
      m.layers.push_back(pool);
      ++block;
      within = 1;
    }
    in = out;
  }
  const auto path = dir / "manifest.json";
  write_manifest(m, path);
  return path;
}

}  // namespace lexivis
