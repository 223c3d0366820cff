#pragma once

#include <span>
#include <string>
#include <vector>

#include "wpool/engine.hpp"
#include "wpool/pool.hpp"

namespace wpool {

// Table storage in bits: 2^n * s * entry_bits. Guarded against overflow for
// n <= 24.
uint64_t lut_storage_bits(uint32_t n, uint32_t s, uint32_t entry_bits);

// Whole-network ratio when every weight is pooled:
// W * B_w / (ceil(W/N) * index_bits + 2^N * S * B_l). Byte-aligned indices
// (index_bits = 8) are the practical default; log2(S) is the packed option.
double compression_ratio(uint64_t total_params, uint32_t weight_bits, uint32_t group_size,
                         uint32_t pool_size, uint32_t entry_bits, uint32_t index_bits);

struct CompressionReport {
  uint64_t total_params = 0;  // W, across all layers
  uint64_t compressed_params = 0;
  uint64_t excluded_params = 0;
  uint32_t weight_bits = 8;  // B_w
  uint32_t group_size = 8;   // N
  uint32_t pool_size = 64;   // S
  uint32_t lut_bits = 8;     // B_l
  uint32_t index_bits = 8;
  uint64_t original_bits = 0;
  uint64_t storage_index_bits = 0;
  uint64_t storage_lut_bits = 0;
  uint64_t storage_excluded_bits = 0;
  uint64_t total_compressed_bits = 0;  // sum of the three storage terms
  double cr = 0.0;
  double lut_overhead_pct = 0.0;
};

// Excluded layers charged at weight_bits per parameter, compressed layers at
// index_bits per stored index, the LUT once globally (absent when the pool
// is empty). Biases are not counted on either side.
CompressionReport model_compression_report(const CompressedModel& model, uint32_t index_bits = 8,
                                           uint32_t weight_bits = 8, uint32_t lut_bits = 8);

std::string report_to_text(const CompressionReport& report);
std::string report_to_json(const CompressionReport& report);

// Synthetic single-layer benchmark fixture (seeded pool, indices and input).
struct BenchLayer {
  uint32_t channels = 128;
  uint32_t filters = 128;
  uint32_t hw = 16;  // square input
  uint32_t kernel = 3;
  uint32_t stride = 1;
  uint32_t pad = 1;
  uint32_t pool_size = 64;
  uint32_t group_size = 8;
  uint8_t act_bits = 8;  // data bitwidth the sweep truncates from
  uint8_t lut_bits = 8;
  uint8_t weight_bits = 8;
  uint64_t seed = kDefaultSeed;
};

struct SpeedupRow {
  uint8_t m = 8;
  uint64_t cycles_direct = 0;
  double speedup_direct = 1.0;  // vs the m = 8 run of the same series
  uint64_t cycles_precompute = 0;
  double speedup_precompute = 1.0;
};

// Runs the engine at each bitwidth with caching on, normalizing to the m = 8
// row. Both precompute-off and precompute-on series are reported.
std::vector<SpeedupRow> speedup_curve(const BenchLayer& bench, const MemoryModel& mem,
                                      std::span<const uint8_t> bit_list);

struct CachingRow {
  uint32_t filters = 0;
  uint64_t baseline_cycles = 0;       // caching off, precompute off
  uint64_t caching_cycles = 0;        // caching on, precompute off
  uint64_t precompute_cycles = 0;     // caching on, precompute on
  double caching_speedup = 1.0;       // baseline / caching
  double precompute_speedup = 1.0;    // baseline / precompute+caching
};

// Filter-count sweep with channels matched to filters.
std::vector<CachingRow> caching_curve(const BenchLayer& bench, const MemoryModel& mem,
                                      std::span<const uint32_t> filter_counts);

std::string speedup_curve_to_csv(std::span<const SpeedupRow> rows);
std::string caching_curve_to_csv(std::span<const CachingRow> rows);

// Stats report: per-layer counters plus totals.
std::string stats_to_json(const RunResult& result, const MemoryModel& mem);

}  // namespace wpool
