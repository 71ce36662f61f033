#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lexivis/tensor.hpp"
#include "lexivis/weights.hpp"

namespace lexivis {

// Which activation of each conv layer is captured as its feature-map stack.
enum class CaptureMode { post_relu, pre_relu };

inline std::string to_string(CaptureMode m) { return m == CaptureMode::post_relu ? "post_relu" : "pre_relu"; }

// One activation stack per conv layer, in forward order.
struct FeatureMapSet {
  std::vector<Tensor> layers;
  CaptureMode mode = CaptureMode::post_relu;

  std::size_t kernel_count() const {
    std::size_t n = 0;
    for (const auto& t : layers) n += t.channels();
    return n;
  }
};

// VGG-19 convolutional trunk with all weights resident. Immutable once
// constructed; forward passes on distinct inputs may run concurrently.
class Vgg19 {
 public:
  explicit Vgg19(const WeightManifest& manifest) : manifest_(manifest) {
    for (const auto* spec : manifest_.conv_layers()) convs_.push_back(load_conv_weights(*spec));
  }

  const WeightManifest& manifest() const noexcept { return manifest_; }
  const Normalization& normalization() const noexcept { return manifest_.normalization; }
  const std::vector<ConvWeights>& convs() const noexcept { return convs_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : convs_) n += w.weights.size();
    return n;
  }
  std::size_t bias_count() const {
    std::size_t n = 0;
    for (const auto& w : convs_) n += w.bias.size();
    return n;
  }

  // Input must be 3x224x224 and already normalized. Classifier layers are
  // never run; trailing pooling after the last capture is skipped.
  FeatureMapSet forward_collect(const Tensor& input, CaptureMode mode = CaptureMode::post_relu,
                                unsigned threads = 0) const {
    if (input.channels() != 3 || input.height() != kVgg19InputSize || input.width() != kVgg19InputSize) {
      throw ArgumentError("forward_collect expects a 3x224x224 input, got " + std::to_string(input.channels()) +
                          "x" + std::to_string(input.height()) + "x" + std::to_string(input.width()));
    }
    FeatureMapSet out;
    out.mode = mode;
    out.layers.reserve(convs_.size());
    Tensor x = input;
    std::size_t conv_index = 0;
    for (const auto& layer : manifest_.layers) {
      if (out.layers.size() == convs_.size()) break;
      switch (layer.kind) {
        case LayerKind::conv:
          x = conv2d(x, convs_.at(conv_index++), layer.stride, layer.padding, threads);
          if (mode == CaptureMode::pre_relu) out.layers.push_back(x);
          break;
        case LayerKind::relu:
          x = relu(std::move(x));
          if (mode == CaptureMode::post_relu) out.layers.push_back(x);
          break;
        case LayerKind::maxpool:
          x = maxpool2(x);
          break;
      }
    }
    return out;
  }

 private:
  WeightManifest manifest_;
  std::vector<ConvWeights> convs_;
};

}  // namespace lexivis
