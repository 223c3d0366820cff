#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wpool/pool.hpp"
#include "wpool/quant.hpp"

namespace wpool {

enum class PrecomputeMode : uint8_t { automatic = 0, on = 1, off = 2 };
// `on` degrades to off with a warning when the working set cannot fit;
// `forced` raises capacity_exceeded instead.
enum class CacheMode : uint8_t { off = 0, on = 1, forced = 2 };

struct EngineConfig {
  uint8_t act_bits = 8;  // bit-serial steps to run, MSB first; must not exceed
                         // the bitwidth the activations were quantized to
  PrecomputeMode precompute = PrecomputeMode::automatic;
  CacheMode caching = CacheMode::on;
  LutOrder order = LutOrder::input_oriented;
  uint8_t lut_bits = 8;     // for tables built on the fly
  uint8_t weight_bits = 8;  // pool quantization for tables built on the fly
};

// Two-level flash/SRAM hierarchy: capacities from board presets, per-access
// latencies as plain cycle constants.
struct MemoryModel {
  uint32_t flash_read_cycles = 4;
  uint32_t sram_read_cycles = 1;
  uint32_t sram_write_cycles = 1;
  uint32_t alu_op_cycles = 1;
  uint64_t sram_bytes = 128 * 1024;
  uint64_t flash_bytes = 1024 * 1024;

  static MemoryModel mc_large();  // 128 kB SRAM, 1024 kB flash
  static MemoryModel mc_small();  // 20 kB SRAM, 128 kB flash
  void validate() const;
};

// Access counters for one serial execution trace. Residency rules: the LUT
// lives in flash unless block-cached; activations, bit rows, precompute
// buffers and output accumulators live in SRAM; index arrays live in flash.
// Counters are memory transactions: a random LUT fetch is one read, a cached
// block copy moves 32-bit words (word count lands in flash_reads/sram_writes,
// entry count in lut_entries_cached). lut_lookups counts every result fetch,
// including precomputed-result reads; lut_lookups_flash/_sram split only the
// LUT-table fetches by residency. None of the lookup counters carry latency
// of their own: each fetch already counted one flash or SRAM read.
struct ExecStats {
  uint64_t flash_reads = 0;
  uint64_t sram_reads = 0;
  uint64_t sram_writes = 0;
  uint64_t lut_lookups = 0;
  uint64_t lut_lookups_flash = 0;
  uint64_t lut_lookups_sram = 0;
  uint64_t shifts = 0;
  uint64_t accumulates = 0;
  uint64_t mults = 0;      // uncompressed (multiply-accumulate) path only
  uint64_t unpack_ops = 0;  // single-bit extractions during decomposition
  uint64_t lut_entries_cached = 0;
  uint64_t cache_bytes_peak = 0;
  uint64_t modeled_cycles = 0;
  bool precompute_used = false;
  bool caching_used = false;

  ExecStats& operator+=(const ExecStats& other);
};

// modeled_cycles = flash_reads * flash + sram_reads * sram_r
//                + sram_writes * sram_w + (shifts + accumulates + mults
//                + unpack_ops) * alu
uint64_t modeled_cycles_of(const ExecStats& stats, const MemoryModel& mem);

// SRAM-resident copy of the LUT blocks matching the current bit rows, one
// block of S entries per distinct pattern.
struct LutCache {
  uint32_t s = 0;
  uint8_t entry_bits = 8;
  std::vector<uint32_t> patterns;
  std::vector<int32_t> entries;  // patterns.size() blocks of s values

  size_t block_bytes() const { return (size_t(s) * entry_bits + 7) / 8; }
  size_t bytes() const { return patterns.size() * block_bytes(); }
  const int32_t* find(uint32_t pattern) const;
  void clear();
};

// Copies the <= M active blocks from flash into modeled SRAM; duplicate
// patterns are cached once. Requires an input-oriented table (blocks are
// contiguous only in that order).
LutCache cache_active_lut(const LutTable& lut, const BitPlaneMatrix& planes,
                          const MemoryModel& mem, ExecStats& stats);

// Full bit-serial result for every pool vector, computed once per activation
// group so the filter loop can reuse them. planes rows run LSB..MSB as in
// BitPlaneMatrix; accumulation is MSB first.
std::vector<int64_t> precompute_block(const BitPlaneMatrix& planes, const LutTable& lut,
                                      const LutCache* cache, ExecStats& stats);

// Bit-serial lookup convolution over a compressed layer. Loop nest: output
// position, kernel position, channel group; the group's bit rows are
// unpacked once and shared across the filter loop. Precompute `automatic`
// switches on when the filter count exceeds the pool size. Output
// accumulators carry the exact integer result sum(q_a * q_w) rescaled by
// 2^entry_scale_exp; bitwidths below the data width zero the dropped low
// bits (pure loop truncation). No bias or activation function is applied.
AccTensor conv_bitserial(const QTensor& input, const LayerSpec& spec,
                         std::span<const uint32_t> indices, uint32_t pad_tail,
                         const LutTable& lut, const EngineConfig& cfg, const MemoryModel& mem,
                         ExecStats& stats, std::vector<std::string>* warnings = nullptr,
                         std::ostream* trace = nullptr);

struct RunResult {
  Tensor output;
  std::vector<ExecStats> layer_stats;
  ExecStats total;
  std::vector<std::string> warnings;
};

// Runs every layer: compressed ones through the bit-serial engine,
// excluded ones through the integer reference path with per-layer
// power-of-two weight scales. Requires calibration.
RunResult run_network(const CompressedModel& model, const Tensor& input, const EngineConfig& cfg,
                      const MemoryModel& mem, std::ostream* trace = nullptr);

// Float oracle: the same network evaluated with reconstructed weights in
// 32-bit arithmetic, no quantization anywhere.
Tensor run_network_reference(const CompressedModel& model, const Tensor& input);

// Integer weights for one layer rebuilt from the pool quantized exactly as
// build_lut quantizes it (shared table-wide scale).
QWeights reconstruct_layer_weights_q(const CompressedLayer& layer, const WeightPool& pool,
                                     uint32_t group_size, uint8_t weight_bits);

// Runs the float reference over calibration samples, collects every layer's
// input activations and stores searched ranges into the model.
void calibrate_model(CompressedModel& model, std::span<const Tensor> samples, uint8_t act_bits);

}  // namespace wpool
