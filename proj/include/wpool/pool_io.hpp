#pragma once

#include <filesystem>

#include "wpool/pool.hpp"

namespace wpool {

// WPNC v1 compressed-model container: little-endian, magic "WPNC", u16
// version, u16 content revision (1 = uncalibrated, 2 = calibrated), pool
// table (S x N reals plus provenance), per-layer records with exclusion
// flags, pad metadata, index arrays (one byte per index while the pool fits
// in 256 entries, two otherwise) and quantization metadata, then an optional
// embedded LUT blob. Byte layout is deterministic.
void save_compressed(const CompressedModel& model, const std::filesystem::path& path);
CompressedModel load_compressed(const std::filesystem::path& path);

}  // namespace wpool
