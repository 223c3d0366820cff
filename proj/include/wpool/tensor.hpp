#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wpool {

// Dense row-major tensor of 32-bit reals, up to 4 extents.
// Weight tensors use extent order (out_ch, kh, kw, depth); activation
// tensors use (h, w, ch).
struct Tensor {
  std::vector<uint32_t> shape;
  std::vector<float> data;

  static Tensor zeros(std::vector<uint32_t> shape);
  size_t size() const;
  // extent product must equal data length; every value finite; 1..4 dims
  void validate() const;
};

// Unsigned quantized activations; every value < 2^bits.
struct QTensor {
  std::vector<uint32_t> shape;
  std::vector<uint8_t> data;
  uint8_t bits = 8;
};

// Wide integer accumulators.
struct AccTensor {
  std::vector<uint32_t> shape;
  std::vector<int64_t> data;
};

size_t shape_size(std::span<const uint32_t> shape);
bool same_shape(std::span<const uint32_t> a, std::span<const uint32_t> b);

}  // namespace wpool
