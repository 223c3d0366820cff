#pragma once

#include <optional>
#include <vector>

#include "wpool/tensor.hpp"

namespace wpool {

enum class LayerKind : uint8_t { conv2d = 0, depthwise = 1, fully_connected = 2 };

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::conv2d;
  uint32_t in_ch = 0;
  uint32_t out_ch = 0;
  uint32_t kh = 1;
  uint32_t kw = 1;
  uint32_t stride = 1;
  uint32_t pad = 0;
  bool has_relu = false;

  void validate() const;
  // canonical weight extents (out_ch, kh, kw, depth)
  std::vector<uint32_t> weight_shape() const;
  // per-filter kernel depth: in_ch for conv2d / fully-connected, 1 for depthwise
  uint32_t filter_depth() const;
};

// Activation quantization. Zero point is fixed at 0 (unsigned, post-ReLU
// domain); dequantization is x = q * scale.
struct QuantParams {
  uint8_t bits = 8;
  float scale = 1.0f;
  float hi() const;  // clip value scale * (2^bits - 1)
};

struct Layer {
  LayerSpec spec;
  Tensor weights;
  std::optional<std::vector<float>> bias;  // per-filter, never pooled
  std::optional<QuantParams> qparams;      // input quantization, set by calibration
};

struct ModelGraph {
  std::vector<uint32_t> input_shape;  // (h, w, ch)
  std::vector<Layer> layers;

  void validate() const;
  // shape of the activation tensor feeding layer i; i == layers.size()
  // yields the network output shape
  std::vector<uint32_t> activation_shape(size_t i) const;
};

std::vector<uint32_t> layer_output_shape(std::span<const uint32_t> input, const LayerSpec& spec);

}  // namespace wpool
