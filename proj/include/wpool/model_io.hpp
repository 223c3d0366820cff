#pragma once

#include <filesystem>

#include "wpool/model.hpp"

namespace wpool {

// WPNN v1 model container: little-endian, magic "WPNN", u16 version, input
// shape, layer count, then per-layer records (kind tag, shape fields, flags,
// raw tensor payload, optional bias and quantization parameters).
// Serialization is deterministic: identical graphs produce identical bytes.
void save_model(const ModelGraph& graph, const std::filesystem::path& path);
ModelGraph load_model(const std::filesystem::path& path);

// Raw tensor interchange: u32 ndim, u32 extents, then little-endian f32
// payload. Intended for fixture generation by external scripts.
void save_tensor_raw(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor_raw(const std::filesystem::path& path);

}  // namespace wpool
