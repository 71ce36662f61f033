#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexivis/errors.hpp"
#include "lexivis/sha256.hpp"
#include "lexivis/tensor.hpp"

namespace lexivis {

namespace fs = std::filesystem;

inline constexpr std::array<std::size_t, 16> kVgg19Channels = {
    64, 64, 128, 128, 256, 256, 256, 256, 512, 512, 512, 512, 512, 512, 512, 512};

// 1-based conv indices followed by a 2x2 max-pool.
inline constexpr std::array<std::size_t, 5> kVgg19PoolAfter = {2, 4, 8, 12, 16};

inline constexpr std::size_t kVgg19InputSize = 224;

enum class ChannelOrder { rgb, bgr };

struct Normalization {
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};
  ChannelOrder channel_order = ChannelOrder::rgb;
  float pixel_scale = 255.0f;
};

struct BlobRef {
  fs::path path;  // resolved against the manifest directory
  std::string dtype = "f32le";
  std::vector<std::size_t> shape;
  std::string sha256;

  std::size_t element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  }
};

enum class LayerKind { conv, relu, maxpool };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
  }
  return "?";
}

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  // conv only
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  BlobRef weights;
  BlobRef bias;
};

struct WeightManifest {
  std::string arch_name;
  Normalization normalization;
  std::vector<LayerSpec> layers;
  fs::path source;      // manifest file
  std::string digest;   // sha256 of the manifest bytes

  std::vector<const LayerSpec*> conv_layers() const {
    std::vector<const LayerSpec*> out;
    for (const auto& l : layers) {
      if (l.kind == LayerKind::conv) out.push_back(&l);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Raw f32 little-endian blobs

inline std::vector<float> decode_f32le(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) throw FormatError("f32le blob length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                            static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                            static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                            static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

inline std::vector<std::uint8_t> encode_f32le(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i] = static_cast<std::uint8_t>(u);
    out[4 * i + 1] = static_cast<std::uint8_t>(u >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(u >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(u >> 24);
  }
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("short read from " + path.string());
  }
  return bytes;
}

inline void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

// Reads a blob, verifying digest first and then the declared length.
inline std::vector<float> load_blob(const BlobRef& ref) {
  if (ref.dtype != "f32le") throw FormatError(ref.path.string() + ": unsupported dtype " + ref.dtype);
  const auto bytes = read_file_bytes(ref.path);
  const auto actual = sha256_hex(bytes);
  if (actual != ref.sha256) {
    throw IntegrityError(ref.path.string() + ": sha256 mismatch (expected " + ref.sha256 +
                         ", got " + actual + ")");
  }
  if (bytes.size() != ref.element_count() * 4) {
    throw FormatError(ref.path.string() + ": " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(ref.element_count() * 4));
  }
  return decode_f32le(bytes);
}

// ---------------------------------------------------------------------------
// Manifest

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FormatError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

inline BlobRef parse_blob(const nlohmann::json& j, const fs::path& base, const std::string& where) {
  BlobRef ref;
  ref.path = base / require(j, "path", where).get<std::string>();
  ref.dtype = require(j, "dtype", where).get<std::string>();
  ref.shape = require(j, "shape", where).get<std::vector<std::size_t>>();
  ref.sha256 = require(j, "sha256", where).get<std::string>();
  return ref;
}

inline std::vector<LayerKind> vgg19_kind_sequence() {
  std::vector<LayerKind> kinds;
  for (std::size_t i = 1; i <= kVgg19Channels.size(); ++i) {
    kinds.push_back(LayerKind::conv);
    kinds.push_back(LayerKind::relu);
    if (std::find(kVgg19PoolAfter.begin(), kVgg19PoolAfter.end(), i) != kVgg19PoolAfter.end()) {
      kinds.push_back(LayerKind::maxpool);
    }
  }
  return kinds;
}

inline void validate_vgg19(const WeightManifest& m) {
  const auto convs = m.conv_layers();
  if (convs.size() != kVgg19Channels.size()) {
    throw FormatError("layer sequence: vgg19 needs 16 conv layers, manifest declares " +
                      std::to_string(convs.size()));
  }
  const auto expected = vgg19_kind_sequence();
  if (m.layers.size() != expected.size()) {
    throw FormatError("layer sequence: vgg19 needs " + std::to_string(expected.size()) +
                      " layers, manifest declares " + std::to_string(m.layers.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (m.layers[i].kind != expected[i]) {
      throw FormatError("layer sequence: entry " + std::to_string(i) + " ('" + m.layers[i].name +
                        "') is " + to_string(m.layers[i].kind) + ", expected " + to_string(expected[i]));
    }
  }
  std::size_t in = 3;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& l = *convs[i];
    if (l.out_channels != kVgg19Channels[i] || l.in_channels != in) {
      throw FormatError("layer sequence: conv " + std::to_string(i + 1) + " ('" + l.name + "') is " +
                        std::to_string(l.in_channels) + "->" + std::to_string(l.out_channels) +
                        ", expected " + std::to_string(in) + "->" + std::to_string(kVgg19Channels[i]));
    }
    if (l.kernel != 3 || l.stride != 1 || l.padding != 1) {
      throw FormatError("layer '" + l.name + "': vgg19 convs are 3x3, stride 1, padding 1");
    }
    const std::vector<std::size_t> wshape{l.out_channels, l.in_channels, 3, 3};
    if (l.weights.shape != wshape) throw FormatError("layer '" + l.name + "': weights shape mismatch");
    if (l.bias.shape != std::vector<std::size_t>{l.out_channels}) {
      throw FormatError("layer '" + l.name + "': bias shape mismatch");
    }
    in = l.out_channels;
  }
}

}  // namespace detail

inline WeightManifest parse_manifest(const std::string& text, const fs::path& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(source.string() + ": " + e.what());
  }
  const std::string where = source.string();
  const fs::path base = source.parent_path();
  WeightManifest m;
  m.source = source;
  m.digest = sha256_hex(text);
  try {
    m.arch_name = detail::require(j, "arch_name", where).get<std::string>();
    if (m.arch_name != "vgg19") throw FormatError(where + ": unknown arch '" + m.arch_name + "'");

    const auto& norm = detail::require(j, "normalization", where);
    m.normalization.mean = detail::require(norm, "mean", where).get<std::array<float, 3>>();
    m.normalization.std = detail::require(norm, "std", where).get<std::array<float, 3>>();
    m.normalization.pixel_scale = detail::require(norm, "pixel_scale", where).get<float>();
    const auto order = detail::require(norm, "channel_order", where).get<std::string>();
    if (order == "rgb") {
      m.normalization.channel_order = ChannelOrder::rgb;
    } else if (order == "bgr") {
      m.normalization.channel_order = ChannelOrder::bgr;
    } else {
      throw FormatError(where + ": channel_order must be rgb or bgr");
    }
    for (float s : m.normalization.std) {
      if (!(s > 0.0f)) throw FormatError(where + ": normalization std must be positive");
    }
    if (!(m.normalization.pixel_scale > 0.0f)) throw FormatError(where + ": pixel_scale must be positive");

    for (const auto& lj : detail::require(j, "layers", where)) {
      LayerSpec l;
      l.name = detail::require(lj, "name", where).get<std::string>();
      const auto kind = detail::require(lj, "kind", where).get<std::string>();
      const std::string lwhere = where + " layer '" + l.name + "'";
      if (kind == "conv") {
        l.kind = LayerKind::conv;
        l.in_channels = detail::require(lj, "in_channels", lwhere).get<std::size_t>();
        l.out_channels = detail::require(lj, "out_channels", lwhere).get<std::size_t>();
        l.kernel = detail::require(lj, "kernel", lwhere).get<std::size_t>();
        l.stride = detail::require(lj, "stride", lwhere).get<std::size_t>();
        l.padding = detail::require(lj, "padding", lwhere).get<std::size_t>();
        l.weights = detail::parse_blob(detail::require(lj, "weights", lwhere), base, lwhere);
        l.bias = detail::parse_blob(detail::require(lj, "bias", lwhere), base, lwhere);
      } else if (kind == "relu") {
        l.kind = LayerKind::relu;
      } else if (kind == "maxpool") {
        l.kind = LayerKind::maxpool;
      } else {
        throw FormatError(lwhere + ": unknown layer kind '" + kind + "'");
      }
      m.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  detail::validate_vgg19(m);
  return m;
}

// Parses and validates a manifest; blobs are checked for existence only.
inline WeightManifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight manifest " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto m = parse_manifest(text, path);
  for (const auto* l : m.conv_layers()) {
    for (const auto* ref : {&l->weights, &l->bias}) {
      if (!fs::is_regular_file(ref->path)) {
        throw IoError("layer '" + l->name + "': blob not found: " + ref->path.string());
      }
    }
  }
  return m;
}

inline ConvWeights load_conv_weights(const LayerSpec& spec) {
  if (spec.kind != LayerKind::conv) throw ArgumentError("layer '" + spec.name + "' is not a conv layer");
  ConvWeights w;
  w.out_channels = spec.out_channels;
  w.in_channels = spec.in_channels;
  w.kernel_h = spec.kernel;
  w.kernel_w = spec.kernel;
  w.weights = load_blob(spec.weights);
  w.bias = load_blob(spec.bias);
  w.validate();
  return w;
}

// Manifest writer used by the synthetic-weight exporter and by tests.
inline nlohmann::json manifest_to_json(const WeightManifest& m, const fs::path& base) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["arch_name"] = m.arch_name;
  j["normalization"] = {
      {"mean", m.normalization.mean},
      {"std", m.normalization.std},
      {"channel_order", m.normalization.channel_order == ChannelOrder::rgb ? "rgb" : "bgr"},
      {"pixel_scale", m.normalization.pixel_scale},
  };
  auto blob = [&](const BlobRef& b) {
    return nlohmann::json{{"path", fs::relative(b.path, base).generic_string()},
                          {"dtype", b.dtype},
                          {"shape", b.shape},
                          {"sha256", b.sha256}};
  };
  j["layers"] = nlohmann::json::array();
  for (const auto& l : m.layers) {
    nlohmann::json lj{{"name", l.name}, {"kind", to_string(l.kind)}};
    if (l.kind == LayerKind::conv) {
      lj["in_channels"] = l.in_channels;
      lj["out_channels"] = l.out_channels;
      lj["kernel"] = l.kernel;
      lj["stride"] = l.stride;
      lj["padding"] = l.padding;
      lj["weights"] = blob(l.weights);
      lj["bias"] = blob(l.bias);
    }
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

inline void write_manifest(const WeightManifest& m, const fs::path& path) {
  const auto text = manifest_to_json(m, path.parent_path()).dump(2) + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace lexivis
