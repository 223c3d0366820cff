#include "wpool/costmodel.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wpool/error.hpp"

namespace wpool {

using ordered_json = nlohmann::ordered_json;

uint64_t lut_storage_bits(uint32_t n, uint32_t s, uint32_t entry_bits) {
  if (n == 0 || s == 0 || entry_bits == 0)
    fail(Errc::invalid_config, "LUT storage parameters must be positive");
  if (n > 24) fail(Errc::invalid_config, "group width above 24 overflows the storage model");
  return (uint64_t(1) << n) * s * entry_bits;
}

double compression_ratio(uint64_t total_params, uint32_t weight_bits, uint32_t group_size,
                         uint32_t pool_size, uint32_t entry_bits, uint32_t index_bits) {
  if (total_params == 0 || weight_bits == 0 || group_size == 0 || index_bits == 0)
    fail(Errc::invalid_config, "compression ratio parameters must be positive");
  const uint64_t groups = (total_params + group_size - 1) / group_size;
  const uint64_t denom = groups * index_bits + lut_storage_bits(group_size, pool_size, entry_bits);
  return double(total_params) * weight_bits / double(denom);
}

CompressionReport model_compression_report(const CompressedModel& model, uint32_t index_bits,
                                           uint32_t weight_bits, uint32_t lut_bits) {
  if (index_bits == 0) fail(Errc::invalid_config, "index bits must be positive");
  CompressionReport r;
  r.weight_bits = weight_bits;
  r.group_size = model.group_size;
  r.pool_size = model.pool_size;
  r.lut_bits = lut_bits;
  r.index_bits = index_bits;
  for (const auto& l : model.layers) {
    const uint64_t params =
        uint64_t(l.spec.out_ch) * l.spec.kh * l.spec.kw * l.spec.filter_depth();
    r.total_params += params;
    if (l.excluded) {
      r.excluded_params += params;
      r.storage_excluded_bits += params * weight_bits;
    } else {
      r.compressed_params += params;
      r.storage_index_bits += uint64_t(l.indices.size()) * index_bits;
    }
  }
  if (model.pool.size() > 0)
    r.storage_lut_bits = lut_storage_bits(model.group_size, model.pool.size(), lut_bits);
  r.original_bits = r.total_params * weight_bits;
  r.total_compressed_bits = r.storage_index_bits + r.storage_lut_bits + r.storage_excluded_bits;
  r.cr = double(r.original_bits) / double(r.total_compressed_bits);
  r.lut_overhead_pct = 100.0 * double(r.storage_lut_bits) / double(r.total_compressed_bits);
  return r;
}

std::string report_to_text(const CompressionReport& r) {
  std::ostringstream out;
  char line[128];
  auto row = [&](const char* k, const std::string& v) {
    std::snprintf(line, sizeof(line), "  %-22s %s\n", k, v.c_str());
    out << line;
  };
  out << "compression report\n";
  row("total params", std::to_string(r.total_params));
  row("compressed params", std::to_string(r.compressed_params));
  row("excluded params", std::to_string(r.excluded_params));
  row("N / S / B_l / B_w", std::to_string(r.group_size) + " / " + std::to_string(r.pool_size) +
                               " / " + std::to_string(r.lut_bits) + " / " +
                               std::to_string(r.weight_bits));
  row("index bits", std::to_string(r.index_bits));
  row("original storage", std::to_string(r.original_bits / 8) + " B");
  row("index storage", std::to_string(r.storage_index_bits / 8) + " B");
  row("LUT storage", std::to_string(r.storage_lut_bits / 8) + " B");
  row("excluded storage", std::to_string(r.storage_excluded_bits / 8) + " B");
  row("compressed storage", std::to_string(r.total_compressed_bits / 8) + " B");
  std::snprintf(line, sizeof(line), "  %-22s %.2f\n", "compression ratio", r.cr);
  out << line;
  std::snprintf(line, sizeof(line), "  %-22s %.1f%%\n", "LUT overhead", r.lut_overhead_pct);
  out << line;
  return out.str();
}

std::string report_to_json(const CompressionReport& r) {
  ordered_json j;
  j["total_params"] = r.total_params;
  j["compressed_params"] = r.compressed_params;
  j["excluded_params"] = r.excluded_params;
  j["weight_bits"] = r.weight_bits;
  j["group_size"] = r.group_size;
  j["pool_size"] = r.pool_size;
  j["lut_bits"] = r.lut_bits;
  j["index_bits"] = r.index_bits;
  j["original_bits"] = r.original_bits;
  j["storage_index_bits"] = r.storage_index_bits;
  j["storage_lut_bits"] = r.storage_lut_bits;
  j["storage_excluded_bits"] = r.storage_excluded_bits;
  j["total_compressed_bits"] = r.total_compressed_bits;
  j["compression_ratio"] = r.cr;
  j["lut_overhead_pct"] = r.lut_overhead_pct;
  return j.dump(2) + "\n";
}

namespace {

struct BenchFixture {
  LayerSpec spec;
  std::vector<uint32_t> indices;
  QTensor input;
  WeightPool pool;
};

BenchFixture make_bench_fixture(const BenchLayer& bench, uint32_t filters, uint32_t channels) {
  BenchFixture f;
  f.spec.kind = LayerKind::conv2d;
  f.spec.in_ch = channels;
  f.spec.out_ch = filters;
  f.spec.kh = f.spec.kw = bench.kernel;
  f.spec.stride = bench.stride;
  f.spec.pad = bench.pad;

  std::mt19937_64 rng(bench.seed);
  std::uniform_real_distribution<float> wdist(-1.0f, 1.0f);
  f.pool.n = bench.group_size;
  f.pool.values.resize(size_t(bench.pool_size) * bench.group_size);
  for (auto& v : f.pool.values) v = wdist(rng);
  f.pool.provenance.seed = bench.seed;

  const uint32_t groups = (channels + bench.group_size - 1) / bench.group_size;
  f.indices.resize(size_t(filters) * bench.kernel * bench.kernel * groups);
  for (auto& idx : f.indices) idx = uint32_t(rng() % bench.pool_size);

  f.input.shape = {bench.hw, bench.hw, channels};
  f.input.bits = bench.act_bits;
  f.input.data.resize(shape_size(f.input.shape));
  const uint32_t qmax = (1u << bench.act_bits) - 1u;
  for (auto& q : f.input.data) q = uint8_t(rng() % (qmax + 1));
  return f;
}

uint64_t bench_cycles(const BenchFixture& f, const LutTable& lut, const BenchLayer& bench,
                      const MemoryModel& mem, uint8_t act_bits, bool precompute, bool caching) {
  EngineConfig cfg;
  cfg.act_bits = act_bits;
  cfg.precompute = precompute ? PrecomputeMode::on : PrecomputeMode::off;
  cfg.caching = caching ? CacheMode::on : CacheMode::off;
  cfg.lut_bits = bench.lut_bits;
  cfg.weight_bits = bench.weight_bits;
  ExecStats stats;
  conv_bitserial(f.input, f.spec, f.indices, (bench.group_size - f.spec.in_ch %
                 bench.group_size) % bench.group_size, lut, cfg, mem, stats);
  return stats.modeled_cycles;
}

}  // namespace

std::vector<SpeedupRow> speedup_curve(const BenchLayer& bench, const MemoryModel& mem,
                                      std::span<const uint8_t> bit_list) {
  if (bit_list.empty()) fail(Errc::invalid_config, "empty bitwidth sweep");
  const BenchFixture f = make_bench_fixture(bench, bench.filters, bench.channels);
  const LutTable lut =
      build_lut(f.pool, bench.lut_bits, LutOrder::input_oriented, bench.weight_bits);

  const uint64_t base_direct = bench_cycles(f, lut, bench, mem, 8, false, true);
  const uint64_t base_pre = bench_cycles(f, lut, bench, mem, 8, true, true);

  std::vector<SpeedupRow> rows;
  for (uint8_t m : bit_list) {
    if (m < 1 || m > 8) fail(Errc::invalid_config, "bitwidth sweep entries must be 1..8");
    SpeedupRow row;
    row.m = m;
    row.cycles_direct = bench_cycles(f, lut, bench, mem, m, false, true);
    row.cycles_precompute = bench_cycles(f, lut, bench, mem, m, true, true);
    row.speedup_direct = double(base_direct) / double(row.cycles_direct);
    row.speedup_precompute = double(base_pre) / double(row.cycles_precompute);
    rows.push_back(row);
  }
  return rows;
}

std::vector<CachingRow> caching_curve(const BenchLayer& bench, const MemoryModel& mem,
                                      std::span<const uint32_t> filter_counts) {
  if (filter_counts.empty()) fail(Errc::invalid_config, "empty filter sweep");
  std::vector<CachingRow> rows;
  for (uint32_t filters : filter_counts) {
    const BenchFixture f = make_bench_fixture(bench, filters, filters);
    const LutTable lut =
        build_lut(f.pool, bench.lut_bits, LutOrder::input_oriented, bench.weight_bits);
    CachingRow row;
    row.filters = filters;
    row.baseline_cycles = bench_cycles(f, lut, bench, mem, bench.act_bits, false, false);
    row.caching_cycles = bench_cycles(f, lut, bench, mem, bench.act_bits, false, true);
    row.precompute_cycles = bench_cycles(f, lut, bench, mem, bench.act_bits, true, true);
    row.caching_speedup = double(row.baseline_cycles) / double(row.caching_cycles);
    row.precompute_speedup = double(row.baseline_cycles) / double(row.precompute_cycles);
    rows.push_back(row);
  }
  return rows;
}

std::string speedup_curve_to_csv(std::span<const SpeedupRow> rows) {
  std::ostringstream out;
  out << "act_bits,cycles_direct,speedup_direct,cycles_precompute,speedup_precompute\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%u,%llu,%.4f,%llu,%.4f\n", unsigned(r.m),
                  (unsigned long long)r.cycles_direct, r.speedup_direct,
                  (unsigned long long)r.cycles_precompute, r.speedup_precompute);
    out << line;
  }
  return out.str();
}

std::string caching_curve_to_csv(std::span<const CachingRow> rows) {
  std::ostringstream out;
  out << "filters,baseline_cycles,caching_cycles,precompute_caching_cycles,"
         "caching_speedup,precompute_caching_speedup\n";
  char line[200];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%u,%llu,%llu,%llu,%.4f,%.4f\n", r.filters,
                  (unsigned long long)r.baseline_cycles, (unsigned long long)r.caching_cycles,
                  (unsigned long long)r.precompute_cycles, r.caching_speedup,
                  r.precompute_speedup);
    out << line;
  }
  return out.str();
}

namespace {

ordered_json stats_json(const ExecStats& s) {
  ordered_json j;
  j["flash_reads"] = s.flash_reads;
  j["sram_reads"] = s.sram_reads;
  j["sram_writes"] = s.sram_writes;
  j["lut_lookups"] = s.lut_lookups;
  j["lut_lookups_flash"] = s.lut_lookups_flash;
  j["lut_lookups_sram"] = s.lut_lookups_sram;
  j["shifts"] = s.shifts;
  j["accumulates"] = s.accumulates;
  j["mults"] = s.mults;
  j["unpack_ops"] = s.unpack_ops;
  j["lut_entries_cached"] = s.lut_entries_cached;
  j["cache_bytes_peak"] = s.cache_bytes_peak;
  j["modeled_cycles"] = s.modeled_cycles;
  return j;
}

}  // namespace

std::string stats_to_json(const RunResult& result, const MemoryModel& mem) {
  ordered_json j;
  j["memory_model"] = {{"flash_read_cycles", mem.flash_read_cycles},
                       {"sram_read_cycles", mem.sram_read_cycles},
                       {"sram_write_cycles", mem.sram_write_cycles},
                       {"alu_op_cycles", mem.alu_op_cycles},
                       {"sram_bytes", mem.sram_bytes},
                       {"flash_bytes", mem.flash_bytes}};
  j["layers"] = ordered_json::array();
  for (size_t i = 0; i < result.layer_stats.size(); ++i) {
    const auto& s = result.layer_stats[i];
    ordered_json l;
    l["index"] = i;
    l["precompute"] = s.precompute_used;
    l["caching"] = s.caching_used;
    l["counters"] = stats_json(s);
    j["layers"].push_back(l);
  }
  j["total"] = stats_json(result.total);
  j["warnings"] = result.warnings;
  return j.dump(2) + "\n";
}

}  // namespace wpool
