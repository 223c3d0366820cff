#pragma once

#include <span>

#include "wpool/model.hpp"

namespace wpool {

// Weights quantized to signed integers of width `bits` with one shared
// power-of-two scale: w ~ values[i] * 2^scale_exp.
struct QWeights {
  std::vector<uint32_t> shape;
  std::vector<int32_t> values;
  int scale_exp = 0;
  uint8_t bits = 8;
};

// Symmetric power-of-two quantizer; picks the smallest exponent that keeps
// round(max|w| / 2^e) within the signed range. Round half away from zero.
QWeights quantize_weights_pow2(std::span<const float> w, std::vector<uint32_t> shape,
                               uint8_t bits);

// Direct convolution in 32-bit real arithmetic with a fixed summation order
// (kh, kw, depth ascending). Padding contributes zeros. No activation
// function is applied; bias, when given, seeds the accumulator.
Tensor reference_conv_f32(const Tensor& input, const LayerSpec& spec, const Tensor& weights,
                          std::span<const float> bias = {});

// Exact integer convolution, 64-bit accumulation, same loop order, no
// intermediate saturation.
AccTensor reference_conv_int(const QTensor& input, const LayerSpec& spec,
                             const QWeights& weights, std::span<const int64_t> bias = {});

}  // namespace wpool
