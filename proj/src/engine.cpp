#include "wpool/engine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "wpool/error.hpp"
#include "wpool/reference.hpp"

namespace wpool {

MemoryModel MemoryModel::mc_large() {
  MemoryModel m;
  m.sram_bytes = 128 * 1024;
  m.flash_bytes = 1024 * 1024;
  return m;
}

MemoryModel MemoryModel::mc_small() {
  MemoryModel m;
  m.sram_bytes = 20 * 1024;
  m.flash_bytes = 128 * 1024;
  return m;
}

void MemoryModel::validate() const {
  if (flash_read_cycles < sram_read_cycles)
    fail(Errc::invalid_config, "flash reads cannot be faster than SRAM reads");
  if (flash_read_cycles == 0 || sram_read_cycles == 0 || sram_write_cycles == 0 ||
      alu_op_cycles == 0)
    fail(Errc::invalid_config, "latency constants must be positive");
}

ExecStats& ExecStats::operator+=(const ExecStats& o) {
  flash_reads += o.flash_reads;
  sram_reads += o.sram_reads;
  sram_writes += o.sram_writes;
  lut_lookups += o.lut_lookups;
  lut_lookups_flash += o.lut_lookups_flash;
  lut_lookups_sram += o.lut_lookups_sram;
  shifts += o.shifts;
  accumulates += o.accumulates;
  mults += o.mults;
  unpack_ops += o.unpack_ops;
  lut_entries_cached += o.lut_entries_cached;
  cache_bytes_peak = std::max(cache_bytes_peak, o.cache_bytes_peak);
  modeled_cycles += o.modeled_cycles;
  precompute_used = precompute_used || o.precompute_used;
  caching_used = caching_used || o.caching_used;
  return *this;
}

uint64_t modeled_cycles_of(const ExecStats& s, const MemoryModel& mem) {
  return s.flash_reads * mem.flash_read_cycles + s.sram_reads * mem.sram_read_cycles +
         s.sram_writes * mem.sram_write_cycles +
         (s.shifts + s.accumulates + s.mults + s.unpack_ops) * mem.alu_op_cycles;
}

const int32_t* LutCache::find(uint32_t pattern) const {
  for (size_t b = 0; b < patterns.size(); ++b)
    if (patterns[b] == pattern) return entries.data() + b * s;
  return nullptr;
}

void LutCache::clear() {
  patterns.clear();
  entries.clear();
}

namespace {

// One cache-block copy, charged at 32-bit word granularity.
void copy_block(const LutTable& lut, uint32_t pattern, LutCache& cache, ExecStats& stats) {
  const size_t base = cache.entries.size();
  cache.entries.resize(base + cache.s);
  for (uint32_t v = 0; v < cache.s; ++v) cache.entries[base + v] = lut.at(pattern, v);
  cache.patterns.push_back(pattern);
  const uint64_t words = (cache.block_bytes() + 3) / 4;
  stats.flash_reads += words;
  stats.sram_writes += words;
  stats.lut_entries_cached += cache.s;
}

void fill_cache(const LutTable& lut, std::span<const uint32_t> rows, const MemoryModel& mem,
                LutCache& cache, ExecStats& stats) {
  cache.s = lut.s;
  cache.entry_bits = lut.entry_bits;
  cache.clear();
  for (uint32_t pattern : rows) {
    if (cache.find(pattern)) continue;  // duplicate rows cached once
    copy_block(lut, pattern, cache, stats);
  }
  if (cache.bytes() > mem.sram_bytes)
    fail(Errc::capacity_exceeded, "active LUT blocks exceed SRAM capacity");
  stats.cache_bytes_peak = std::max<uint64_t>(stats.cache_bytes_peak, cache.bytes());
}

inline int32_t fetch_entry(const LutTable& lut, const LutCache* cache, uint32_t pattern,
                           uint32_t pool_index, ExecStats& stats, std::ostream* trace) {
  ++stats.lut_lookups;
  int32_t value;
  const int32_t* block = cache ? cache->find(pattern) : nullptr;
  if (block) {
    ++stats.sram_reads;
    ++stats.lut_lookups_sram;
    value = block[pool_index];
  } else {
    ++stats.flash_reads;
    ++stats.lut_lookups_flash;
    value = lut.at(pattern, pool_index);
  }
  if (trace)
    *trace << "lut src=" << (block ? "sram" : "flash") << " pattern=0x" << std::hex << pattern
           << std::dec << " s=" << pool_index << " val=" << value << "\n";
  return value;
}

}  // namespace

LutCache cache_active_lut(const LutTable& lut, const BitPlaneMatrix& planes,
                          const MemoryModel& mem, ExecStats& stats) {
  if (lut.order != LutOrder::input_oriented)
    fail(Errc::invalid_config, "LUT caching requires an input-oriented table");
  LutCache cache;
  std::vector<uint32_t> rows(planes.bits.begin(), planes.bits.begin() + planes.rows);
  fill_cache(lut, rows, mem, cache, stats);
  return cache;
}

namespace {

// rows_msb runs most significant bit first
void precompute_into(std::span<const uint32_t> rows_msb, const LutTable& lut,
                     const LutCache* cache, std::vector<int64_t>& results, ExecStats& stats,
                     std::ostream* trace) {
  results.assign(lut.s, 0);
  for (uint32_t v = 0; v < lut.s; ++v) {
    int64_t acc = 0;
    for (uint32_t row : rows_msb) {
      ++stats.sram_reads;  // bit-row fetch
      acc = (acc << 1) + fetch_entry(lut, cache, row, v, stats, trace);
      ++stats.shifts;
      ++stats.accumulates;
    }
    results[v] = acc;
    ++stats.sram_writes;  // stored in RAM for the filter loop
  }
}

}  // namespace

std::vector<int64_t> precompute_block(const BitPlaneMatrix& planes, const LutTable& lut,
                                      const LutCache* cache, ExecStats& stats) {
  std::vector<uint32_t> rows_msb(planes.rows);
  for (uint8_t j = 0; j < planes.rows; ++j)
    rows_msb[j] = planes.bits[size_t(planes.rows) - 1 - j];
  std::vector<int64_t> results;
  precompute_into(rows_msb, lut, cache, results, stats, nullptr);
  return results;
}

namespace {

struct LayerGeometry {
  uint32_t h, w, in_ch, oh, ow, out_ch, kh, kw, stride, pad, groups;
};

LayerGeometry resolve_geometry(const QTensor& input, const LayerSpec& spec, uint32_t n) {
  LayerGeometry g{};
  if (spec.kind == LayerKind::fully_connected) {
    // flattened input, single output position, 1x1 kernel
    g.h = g.w = 1;
    g.in_ch = spec.in_ch;
    g.oh = g.ow = 1;
    g.out_ch = spec.out_ch;
    g.kh = g.kw = 1;
    g.stride = 1;
    g.pad = 0;
  } else {
    const auto out = layer_output_shape(input.shape, spec);
    g.h = input.shape[0];
    g.w = input.shape[1];
    g.in_ch = spec.in_ch;
    g.oh = out[0];
    g.ow = out[1];
    g.out_ch = spec.out_ch;
    g.kh = spec.kh;
    g.kw = spec.kw;
    g.stride = spec.stride;
    g.pad = spec.pad;
  }
  g.groups = (g.in_ch + n - 1) / n;
  return g;
}

// Activation residency: padded input and the requantized output plane hold
// one byte per value; only the current output position keeps live 32-bit
// accumulators (the kernel and group loops sit inside the position loop).
uint64_t working_set_bytes(const LayerGeometry& g, uint8_t exec_bits, bool precompute,
                           uint32_t s) {
  const uint64_t padded = uint64_t(g.h + 2 * g.pad) * (g.w + 2 * g.pad) * g.in_ch;
  const uint64_t out_plane = uint64_t(g.oh) * g.ow * g.out_ch;
  const uint64_t live_accs = uint64_t(g.out_ch) * 4;
  const uint64_t rows = uint64_t(exec_bits) * 4;
  const uint64_t pre = precompute ? uint64_t(s) * 4 : 0;
  return padded + out_plane + live_accs + rows + pre;
}

}  // namespace

AccTensor conv_bitserial(const QTensor& input, const LayerSpec& spec,
                         std::span<const uint32_t> indices, uint32_t pad_tail,
                         const LutTable& lut, const EngineConfig& cfg, const MemoryModel& mem,
                         ExecStats& stats, std::vector<std::string>* warnings,
                         std::ostream* trace) {
  spec.validate();
  mem.validate();
  if (spec.kind == LayerKind::depthwise)
    fail(Errc::invalid_config, "compressed depthwise layers are not executable; exclude them");
  if (input.shape.size() != 3) fail(Errc::shape_mismatch, "activation tensors are (h, w, ch)");
  if (cfg.act_bits < 1 || cfg.act_bits > 8)
    fail(Errc::invalid_config, "engine bitwidth out of range 1..8");
  if (cfg.act_bits > input.bits)
    fail(Errc::invalid_config, "engine bitwidth exceeds activation bitwidth");
  if (spec.kind == LayerKind::fully_connected) {
    if (shape_size(input.shape) != spec.in_ch)
      fail(Errc::shape_mismatch, "fully-connected input size != in_ch");
  } else {
    layer_output_shape(input.shape, spec);  // composition check
  }

  const uint8_t n = uint8_t(lut.n);
  const LayerGeometry g = resolve_geometry(input, spec, n);
  if ((g.in_ch % n ? n - g.in_ch % n : 0) != pad_tail)
    fail(Errc::lut_mismatch, "pad_tail does not match LUT group width");
  if (indices.size() != size_t(g.out_ch) * g.kh * g.kw * g.groups)
    fail(Errc::lut_mismatch, "index array does not match layer/LUT geometry");
  for (uint32_t idx : indices)
    if (idx >= lut.s) fail(Errc::out_of_range, "pool index exceeds LUT pool size");

  const uint8_t exec_bits = cfg.act_bits;
  const bool precompute =
      cfg.precompute == PrecomputeMode::on ||
      (cfg.precompute == PrecomputeMode::automatic && g.out_ch > lut.s);

  // residency feasibility; caching degrades before anything else gives
  bool caching = cfg.caching != CacheMode::off;
  if (caching && lut.order != LutOrder::input_oriented) {
    if (cfg.caching == CacheMode::forced)
      fail(Errc::invalid_config, "forced LUT caching requires an input-oriented table");
    caching = false;
    if (warnings) warnings->push_back("lut caching skipped: table is weight-oriented");
  }
  const uint64_t base_bytes = working_set_bytes(g, exec_bits, precompute, lut.s);
  if (caching) {
    const uint64_t cache_bytes =
        uint64_t(exec_bits) * ((size_t(lut.s) * lut.entry_bits + 7) / 8);
    if (base_bytes + cache_bytes > mem.sram_bytes) {
      if (cfg.caching == CacheMode::forced)
        fail(Errc::capacity_exceeded,
             "working set " + std::to_string(base_bytes + cache_bytes) +
                 " B exceeds SRAM capacity " + std::to_string(mem.sram_bytes) +
                 " B with caching forced on");
      caching = false;
      if (warnings)
        warnings->push_back("lut caching disabled: working set exceeds SRAM capacity");
    }
  }
  if (!caching && base_bytes > mem.sram_bytes && warnings)
    warnings->push_back("working set exceeds SRAM capacity even without caching");

  stats.precompute_used = precompute;
  stats.caching_used = caching;

  // padded activation buffer, zero border
  const uint32_t ph = g.h + 2 * g.pad, pw = g.w + 2 * g.pad;
  std::vector<uint8_t> padded(size_t(ph) * pw * g.in_ch, 0);
  for (uint32_t y = 0; y < g.h; ++y)
    for (uint32_t x = 0; x < g.w; ++x)
      std::copy_n(input.data.data() + (size_t(y) * g.w + x) * g.in_ch, g.in_ch,
                  padded.data() + (size_t(y + g.pad) * pw + (x + g.pad)) * g.in_ch);

  AccTensor out;
  out.shape = {g.oh, g.ow, g.out_ch};
  out.data.assign(size_t(g.oh) * g.ow * g.out_ch, 0);

  std::vector<uint32_t> rows_msb(exec_bits);
  std::vector<int64_t> pre_results;
  LutCache cache;
  const uint32_t low_skip = input.bits - exec_bits;

  for (uint32_t oy = 0; oy < g.oh; ++oy) {
    for (uint32_t ox = 0; ox < g.ow; ++ox) {
      int64_t* out_acc = out.data.data() + (size_t(oy) * g.ow + ox) * g.out_ch;
      for (uint32_t ky = 0; ky < g.kh; ++ky) {
        const uint32_t iy = oy * g.stride + ky;
        for (uint32_t kx = 0; kx < g.kw; ++kx) {
          const uint32_t ix = ox * g.stride + kx;
          const uint8_t* px = padded.data() + (size_t(iy) * pw + ix) * g.in_ch;
          for (uint32_t grp = 0; grp < g.groups; ++grp) {
            // bit unpacking, shared across the filter loop
            const uint32_t lane0 = grp * n;
            const uint32_t lanes = std::min<uint32_t>(n, g.in_ch - lane0);
            std::fill(rows_msb.begin(), rows_msb.end(), 0u);
            for (uint32_t i = 0; i < lanes; ++i) {
              const uint8_t q = px[lane0 + i];
              for (uint8_t t = 0; t < exec_bits; ++t)
                rows_msb[t] |= uint32_t((q >> (input.bits - 1 - t)) & 1u) << i;
            }
            stats.sram_reads += lanes;
            stats.unpack_ops += uint64_t(exec_bits) * n;
            stats.sram_writes += exec_bits;
            if (trace)
              *trace << "unpack pos=(" << oy << "," << ox << ") k=(" << ky << "," << kx
                     << ") g=" << grp << " rows=" << int(exec_bits) << "\n";

            const LutCache* active = nullptr;
            if (caching) {
              fill_cache(lut, rows_msb, mem, cache, stats);
              active = &cache;
              if (trace)
                *trace << "cache blocks=" << cache.patterns.size()
                       << " bytes=" << cache.bytes() << "\n";
            }

            const size_t index_base = size_t(ky) * g.kw + kx;
            auto index_of_filter = [&](uint32_t f) {
              return indices[(size_t(f) * g.kh * g.kw + index_base) * g.groups + grp];
            };

            if (precompute) {
              precompute_into(rows_msb, lut, active, pre_results, stats, trace);
              for (uint32_t f = 0; f < g.out_ch; ++f) {
                ++stats.flash_reads;  // weight index
                const uint32_t idx = index_of_filter(f);
                // result fetch: counts as a lookup but not as a table access
                ++stats.sram_reads;
                ++stats.lut_lookups;
                out_acc[f] += pre_results[idx];
                ++stats.sram_reads;
                ++stats.accumulates;
                ++stats.sram_writes;
              }
            } else {
              for (uint32_t f = 0; f < g.out_ch; ++f) {
                ++stats.flash_reads;  // weight index
                const uint32_t idx = index_of_filter(f);
                int64_t acc = 0;
                for (uint8_t t = 0; t < exec_bits; ++t) {
                  ++stats.sram_reads;  // bit-row fetch
                  acc = (acc << 1) + fetch_entry(lut, active, rows_msb[t], idx, stats, trace);
                  ++stats.shifts;
                  ++stats.accumulates;
                }
                out_acc[f] += acc;
                ++stats.sram_reads;
                ++stats.accumulates;
                ++stats.sram_writes;
              }
            }
          }
        }
      }
    }
  }

  // place truncated results back at their true bit positions so runs at a
  // reduced bitwidth equal full runs on low-bit-zeroed activations
  if (low_skip)
    for (auto& v : out.data) v <<= low_skip;

  stats.modeled_cycles = modeled_cycles_of(stats, mem);
  return out;
}

QWeights reconstruct_layer_weights_q(const CompressedLayer& layer, const WeightPool& pool,
                                     uint32_t group_size, uint8_t weight_bits) {
  if (layer.excluded) {
    return quantize_weights_pow2(layer.raw_weights.data, layer.raw_weights.shape, weight_bits);
  }
  const QWeights pool_q = quantize_pool_weights(pool, weight_bits);
  const uint32_t depth = layer.spec.filter_depth();
  const uint32_t groups = layer.groups(group_size);
  const size_t positions = size_t(layer.spec.out_ch) * layer.spec.kh * layer.spec.kw;

  QWeights out;
  out.shape = layer.spec.weight_shape();
  out.bits = weight_bits;
  out.scale_exp = pool_q.scale_exp;
  out.values.assign(positions * depth, 0);
  for (size_t p = 0; p < positions; ++p) {
    int32_t* dst = out.values.data() + p * depth;
    for (uint32_t grp = 0; grp < groups; ++grp) {
      const uint32_t idx = layer.indices[p * groups + grp];
      const int32_t* v = pool_q.values.data() + size_t(idx) * group_size;
      const uint32_t lanes = std::min(group_size, depth - grp * group_size);
      for (uint32_t j = 0; j < lanes; ++j) dst[grp * group_size + j] = v[j];
    }
  }
  return out;
}

namespace {

Tensor flatten_if_fc(const Tensor& t, const LayerSpec& spec) {
  if (spec.kind != LayerKind::fully_connected) return t;
  Tensor flat = t;
  flat.shape = {1, 1, uint32_t(t.data.size())};
  return flat;
}

void apply_relu(Tensor& t) {
  for (auto& v : t.data) v = std::max(v, 0.0f);
}

// im2col-style baseline accounting for uncompressed layers: per tap one
// flash weight read, one SRAM activation read, one multiply, one accumulate.
void count_reference_conv(const LayerSpec& spec, std::span<const uint32_t> out_shape,
                          ExecStats& stats) {
  const uint64_t taps = uint64_t(out_shape[0]) * out_shape[1] * spec.out_ch * spec.kh *
                        spec.kw * spec.filter_depth();
  stats.flash_reads += taps;
  stats.sram_reads += taps;
  stats.mults += taps;
  stats.accumulates += taps;
  stats.sram_writes += uint64_t(out_shape[0]) * out_shape[1] * spec.out_ch;
}

}  // namespace

RunResult run_network(const CompressedModel& model, const Tensor& input, const EngineConfig& cfg,
                      const MemoryModel& mem, std::ostream* trace) {
  input.validate();
  mem.validate();
  if (model.layers.empty()) fail(Errc::shape_mismatch, "compressed model has zero layers");

  // on-device flash footprint: the LUT stands in for the pool itself
  uint64_t flash_bits = 0;
  for (const auto& l : model.layers)
    flash_bits += l.excluded ? l.raw_weights.data.size() * cfg.weight_bits
                             : l.indices.size() * (model.pool.size() > 256 ? 16 : 8);

  RunResult result;

  bool any_compressed = false;
  for (const auto& l : model.layers) any_compressed |= !l.excluded;
  LutTable built;
  const LutTable* lut = nullptr;
  if (any_compressed) {
    if (model.lut && model.lut->order == cfg.order && model.lut->entry_bits == cfg.lut_bits &&
        model.lut->weight_bits == cfg.weight_bits && model.lut->n == model.group_size &&
        model.lut->s == model.pool.size()) {
      lut = &*model.lut;
    } else {
      if (model.lut)
        result.warnings.push_back("embedded LUT does not match engine config; rebuilding");
      built = build_lut(model.pool, cfg.lut_bits, cfg.order, cfg.weight_bits);
      lut = &built;
    }
    flash_bits += lut->storage_bits();
  }
  if (flash_bits / 8 > mem.flash_bytes)
    result.warnings.push_back("model storage exceeds flash capacity: " +
                              std::to_string(flash_bits / 8) + " B");

  Tensor x = input;
  result.layer_stats.resize(model.layers.size());
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const CompressedLayer& layer = model.layers[i];
    ExecStats& stats = result.layer_stats[i];
    if (!layer.qparams)
      fail(Errc::not_calibrated, "layer " + std::to_string(i) + " has no quantization range");
    if (cfg.act_bits > layer.qparams->bits)
      fail(Errc::invalid_config, "layer " + std::to_string(i) +
                                     ": engine bitwidth exceeds calibrated bitwidth");
    try {
      layer_output_shape(layer.spec.kind == LayerKind::fully_connected
                             ? std::vector<uint32_t>{1, 1, uint32_t(shape_size(x.shape))}
                             : x.shape,
                         layer.spec);
    } catch (const Error& e) {
      fail(e.code(), "layer " + std::to_string(i) + ": " + e.what());
    }

    const Tensor xin = flatten_if_fc(x, layer.spec);
    const QTensor q = quantize_with_params(xin, *layer.qparams);
    stats.sram_reads += q.data.size();
    stats.mults += q.data.size();
    stats.sram_writes += q.data.size();

    AccTensor acc;
    double scale;
    if (layer.excluded) {
      const QWeights qw = quantize_weights_pow2(layer.raw_weights.data,
                                                layer.raw_weights.shape, cfg.weight_bits);
      acc = reference_conv_int(q, layer.spec, qw);
      count_reference_conv(layer.spec, acc.shape, stats);
      scale = std::ldexp(double(layer.qparams->scale), qw.scale_exp);
    } else {
      acc = conv_bitserial(q, layer.spec, layer.indices, layer.pad_tail, *lut, cfg, mem, stats,
                           &result.warnings, trace);
      scale = double(layer.qparams->scale) * lut->result_scale();
    }

    Tensor y;
    y.shape = acc.shape;
    y.data.resize(acc.data.size());
    const float* bias = layer.bias ? layer.bias->data() : nullptr;
    const uint32_t out_ch = acc.shape[2];
    for (size_t e = 0; e < acc.data.size(); ++e) {
      double v = double(acc.data[e]) * scale;
      if (bias) v += bias[e % out_ch];
      y.data[e] = float(v);
    }
    if (layer.spec.has_relu) apply_relu(y);
    stats.modeled_cycles = modeled_cycles_of(stats, mem);
    x = std::move(y);
  }

  for (const auto& s : result.layer_stats) result.total += s;
  result.output = std::move(x);
  return result;
}

Tensor run_network_reference(const CompressedModel& model, const Tensor& input) {
  input.validate();
  if (model.layers.empty()) fail(Errc::shape_mismatch, "compressed model has zero layers");
  Tensor x = input;
  for (const auto& layer : model.layers) {
    const Tensor w = reconstruct_layer(layer, model.pool, model.group_size);
    const Tensor xin = flatten_if_fc(x, layer.spec);
    std::span<const float> bias =
        layer.bias ? std::span<const float>(*layer.bias) : std::span<const float>{};
    Tensor y = reference_conv_f32(xin, layer.spec, w, bias);
    if (layer.spec.has_relu) apply_relu(y);
    x = std::move(y);
  }
  return x;
}

void calibrate_model(CompressedModel& model, std::span<const Tensor> samples,
                     uint8_t act_bits) {
  if (samples.empty()) fail(Errc::insufficient_data, "calibration needs at least one sample");
  if (act_bits < 1 || act_bits > 8)
    fail(Errc::invalid_config, "activation bitwidth out of range 1..8");

  std::vector<std::vector<float>> per_layer(model.layers.size());
  for (const Tensor& sample : samples) {
    sample.validate();
    Tensor x = sample;
    for (size_t i = 0; i < model.layers.size(); ++i) {
      const CompressedLayer& layer = model.layers[i];
      per_layer[i].insert(per_layer[i].end(), x.data.begin(), x.data.end());
      const Tensor w = reconstruct_layer(layer, model.pool, model.group_size);
      const Tensor xin = flatten_if_fc(x, layer.spec);
      std::span<const float> bias =
          layer.bias ? std::span<const float>(*layer.bias) : std::span<const float>{};
      Tensor y = reference_conv_f32(xin, layer.spec, w, bias);
      if (layer.spec.has_relu) apply_relu(y);
      x = std::move(y);
    }
  }
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const ActRange range = search_activation_range(per_layer[i], act_bits, &model.warnings);
    QuantParams qp;
    qp.bits = act_bits;
    qp.scale = range.hi / float((1u << act_bits) - 1u);
    model.layers[i].qparams = qp;
  }
}

}  // namespace wpool
