#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wpool/lut.hpp"
#include "wpool/pool.hpp"
#include "wpool/reference.hpp"
#include "wpool/tensor.hpp"

namespace wpool {

// Per-layer activation clip range [0, hi].
struct ActRange {
  float hi = 1.0f;
};

// q = clamp(round(x * (2^bits - 1) / hi), 0, 2^bits - 1); negative inputs
// clamp to 0 (post-ReLU domain). Round half away from zero.
std::pair<QTensor, QuantParams> quantize_activations(const Tensor& t, uint8_t bits, ActRange range);

// Same mapping via a stored scale (q = clamp(round(x / scale))).
QTensor quantize_with_params(const Tensor& t, const QuantParams& params);

// Picks hi minimizing mean squared quantization error over the percentile
// candidates {99, 99.5, 99.9, 99.99, 100} of |x|, then refines with 20
// golden-section steps bracketing the best candidate. All-zero input falls
// back to hi = 1 with a warning.
ActRange search_activation_range(std::span<const float> calib, uint8_t bits,
                                 std::vector<std::string>* warnings = nullptr);

// M one-bit rows over an N-element group; rows[j] holds bit j (LSB-indexed)
// of every element, element i at pattern bit i.
struct BitPlaneMatrix {
  uint8_t rows = 0;   // M
  uint8_t width = 0;  // N
  std::array<uint32_t, 8> bits{};

  uint32_t row(uint8_t j) const { return bits[j]; }
};

BitPlaneMatrix bit_decompose(std::span<const uint8_t> q, uint8_t bits);

// Inverse of bit_decompose: element i = sum_j 2^j * bit_i(rows[j]).
std::vector<uint8_t> bit_recompose(const BitPlaneMatrix& planes);

// Quantizes the pool to weight_bits integers (one symmetric power-of-two
// scale for the whole table), evaluates every pattern x pool-vector dot
// product, and rescales entries into the signed entry_bits range with a
// power-of-two per-table scale.
LutTable build_lut(const WeightPool& pool, uint8_t entry_bits, LutOrder order,
                   uint8_t weight_bits = 8);

// The exact quantizer used by build_lut, exposed so reference paths can
// quantize reconstructed weights identically.
QWeights quantize_pool_weights(const WeightPool& pool, uint8_t weight_bits);

}  // namespace wpool
