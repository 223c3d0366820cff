#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace wpool {

// Two storage layouts for the same entry multiset. Input-oriented places the
// S results for one activation pattern contiguously (2^N blocks of S), which
// is what block caching wants; weight-oriented places the 2^N results for one
// pool vector contiguously (S blocks of 2^N).
enum class LutOrder : uint8_t { input_oriented = 0, weight_oriented = 1 };

const char* lut_order_name(LutOrder order);

// Table of partial dot products between every N-bit activation pattern and
// every pool vector. Bit i of a pattern selects element i of the group.
// Entries are stored at entry_bits precision: entry = round(raw / 2^entry_scale_exp)
// saturated to the signed entry_bits range, where raw is the exact integer dot
// product of pattern bits with the weight_bits-quantized pool vector.
struct LutTable {
  LutOrder order = LutOrder::input_oriented;
  uint32_t n = 8;
  uint32_t s = 64;
  uint8_t entry_bits = 8;
  uint8_t weight_bits = 8;
  int8_t entry_scale_exp = 0;
  int8_t weight_scale_exp = 0;
  std::vector<int32_t> entries;  // 2^n * s values, laid out per `order`

  size_t index_of(uint32_t pattern, uint32_t pool_index) const;
  int32_t at(uint32_t pattern, uint32_t pool_index) const;
  uint64_t storage_bits() const;
  // dequantization factor for a full bit-serial result: 2^(entry+weight exps)
  double result_scale() const;
};

// O(1) address arithmetic in the declared order; both orders return identical
// values for identical arguments.
int32_t lut_lookup(const LutTable& lut, uint32_t pattern, uint32_t pool_index);

// Binary blob: header (magic, order tag, N, S, entry bits, scale exponents)
// followed by packed little-endian entries (two's complement, 4-bit entries
// packed two per byte, low nibble first).
std::vector<uint8_t> lut_to_bytes(const LutTable& lut);
LutTable lut_from_bytes(std::span<const uint8_t> bytes);
void save_lut(const LutTable& lut, const std::filesystem::path& path);
LutTable load_lut(const std::filesystem::path& path);

}  // namespace wpool
