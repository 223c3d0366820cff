#include "wpool/model.hpp"

#include <cmath>
#include <string>

#include "wpool/error.hpp"

namespace wpool {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::depthwise: return "depthwise";
    case LayerKind::fully_connected: return "fully_connected";
  }
  return "unknown";
}

void LayerSpec::validate() const {
  if (in_ch == 0 || out_ch == 0) fail(Errc::shape_mismatch, "layer channel counts must be positive");
  if (kh == 0 || kw == 0) fail(Errc::shape_mismatch, "kernel extents must be >= 1");
  if (stride == 0) fail(Errc::shape_mismatch, "stride must be >= 1");
  if (kind == LayerKind::depthwise && in_ch != out_ch)
    fail(Errc::shape_mismatch, "depthwise layer requires in_ch == out_ch");
  if (kind == LayerKind::fully_connected && (kh != 1 || kw != 1))
    fail(Errc::shape_mismatch, "fully-connected layer uses 1x1 kernel extents");
}

uint32_t LayerSpec::filter_depth() const {
  return kind == LayerKind::depthwise ? 1u : in_ch;
}

std::vector<uint32_t> LayerSpec::weight_shape() const {
  return {out_ch, kh, kw, filter_depth()};
}

float QuantParams::hi() const {
  return scale * static_cast<float>((1u << bits) - 1u);
}

std::vector<uint32_t> layer_output_shape(std::span<const uint32_t> input, const LayerSpec& spec) {
  if (input.size() != 3) fail(Errc::shape_mismatch, "activation tensors are (h, w, ch)");
  const uint32_t h = input[0], w = input[1], c = input[2];
  if (spec.kind == LayerKind::fully_connected) {
    if (static_cast<uint64_t>(h) * w * c != spec.in_ch)
      fail(Errc::shape_mismatch, "fully-connected input size " + std::to_string(uint64_t(h) * w * c) +
                                     " != in_ch " + std::to_string(spec.in_ch));
    return {1, 1, spec.out_ch};
  }
  if (c != spec.in_ch)
    fail(Errc::shape_mismatch, "input channels " + std::to_string(c) + " != in_ch " +
                                   std::to_string(spec.in_ch));
  const int64_t oh = (int64_t(h) + 2 * spec.pad - spec.kh) / spec.stride + 1;
  const int64_t ow = (int64_t(w) + 2 * spec.pad - spec.kw) / spec.stride + 1;
  if (oh <= 0 || ow <= 0) fail(Errc::shape_mismatch, "kernel larger than padded input");
  return {uint32_t(oh), uint32_t(ow), spec.out_ch};
}

void ModelGraph::validate() const {
  if (layers.empty()) fail(Errc::shape_mismatch, "model has zero layers");
  if (input_shape.size() != 3) fail(Errc::shape_mismatch, "model input shape must be (h, w, ch)");
  std::vector<uint32_t> cur = input_shape;
  for (size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    l.spec.validate();
    l.weights.validate();
    if (!same_shape(l.weights.shape, l.spec.weight_shape()))
      fail(Errc::shape_mismatch, "layer " + std::to_string(i) + " weight shape mismatch");
    if (l.bias && l.bias->size() != l.spec.out_ch)
      fail(Errc::shape_mismatch, "layer " + std::to_string(i) + " bias length != out_ch");
    if (l.qparams && (l.qparams->bits < 1 || l.qparams->bits > 8 || l.qparams->scale <= 0))
      fail(Errc::invalid_config, "layer " + std::to_string(i) + " quant params out of range");
    cur = layer_output_shape(cur, l.spec);
  }
}

std::vector<uint32_t> ModelGraph::activation_shape(size_t i) const {
  std::vector<uint32_t> cur = input_shape;
  for (size_t l = 0; l < i && l < layers.size(); ++l) cur = layer_output_shape(cur, layers[l].spec);
  return cur;
}

}  // namespace wpool
