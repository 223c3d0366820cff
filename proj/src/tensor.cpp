#include "wpool/tensor.hpp"

#include <cmath>

#include "wpool/error.hpp"

namespace wpool {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::io_error: return "io_error";
    case Errc::format_error: return "format_error";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::out_of_range: return "out_of_range";
    case Errc::invalid_config: return "invalid_config";
    case Errc::insufficient_data: return "insufficient_data";
    case Errc::capacity_exceeded: return "capacity_exceeded";
    case Errc::not_calibrated: return "not_calibrated";
    case Errc::lut_mismatch: return "lut_mismatch";
  }
  return "unknown";
}

size_t shape_size(std::span<const uint32_t> shape) {
  if (shape.empty()) return 0;
  uint64_t n = 1;
  for (uint32_t e : shape) {
    if (e != 0 && n > UINT64_MAX / e)
      fail(Errc::shape_mismatch, "tensor extent product overflows");
    n *= e;
  }
  return size_t(n);
}

bool same_shape(std::span<const uint32_t> a, std::span<const uint32_t> b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

Tensor Tensor::zeros(std::vector<uint32_t> shape) {
  Tensor t;
  t.data.assign(shape_size(shape), 0.0f);
  t.shape = std::move(shape);
  return t;
}

size_t Tensor::size() const { return shape_size(shape); }

void Tensor::validate() const {
  if (shape.empty() || shape.size() > 4)
    fail(Errc::shape_mismatch, "tensor must have 1..4 extents");
  for (uint32_t e : shape)
    if (e == 0) fail(Errc::shape_mismatch, "tensor extent must be positive");
  if (shape_size(shape) != data.size())
    fail(Errc::shape_mismatch, "tensor extent product does not match payload length");
  for (float v : data)
    if (!std::isfinite(v)) fail(Errc::shape_mismatch, "tensor contains non-finite value");
}

}  // namespace wpool
