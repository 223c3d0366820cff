// End-to-end acceptance suite. Each criterion prints one pass/fail line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "../fixtures.hpp"
#include "../test_util.hpp"
#include "wpool/costmodel.hpp"
#include "wpool/engine.hpp"
#include "wpool/error.hpp"

using namespace wpool;
using namespace wpool::test;

namespace {

int failures = 0;

void criterion(int number, const char* title, const std::function<bool()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string note;
  try {
    ok = body();
  } catch (const std::exception& e) {
    note = std::string(" (exception: ") + e.what() + ")";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("criterion %2d: %s — %s (%.2fs)%s\n", number, ok ? "PASS" : "FAIL", title, secs,
              note.c_str());
  if (!ok) ++failures;
}

bool expect(bool cond, const char* what) {
  if (!cond) std::printf("    check failed: %s\n", what);
  return cond;
}

struct SyntheticLayer {
  LayerSpec spec;
  WeightPool pool;
  std::vector<uint32_t> indices;
  uint32_t pad_tail = 0;
  QTensor input;
};

SyntheticLayer make_layer(std::mt19937_64& rng, uint32_t in_ch, uint32_t filters, uint32_t hw,
                          uint32_t kernel, uint32_t stride, uint32_t pad, uint32_t pool_size) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  SyntheticLayer l;
  l.spec = conv_spec(in_ch, filters, kernel, stride, pad);
  l.pool.n = 8;
  l.pool.values.resize(size_t(pool_size) * 8);
  for (auto& v : l.pool.values) v = dist(rng);
  const uint32_t groups = (in_ch + 7) / 8;
  l.pad_tail = (8 - in_ch % 8) % 8;
  l.indices.resize(size_t(filters) * kernel * kernel * groups);
  for (auto& idx : l.indices) idx = uint32_t(rng() % pool_size);
  l.input = random_qtensor({hw, hw, in_ch}, 8, rng);
  return l;
}

EngineConfig econfig(uint8_t bits, bool precompute, bool caching,
                     LutOrder order = LutOrder::input_oriented) {
  EngineConfig cfg;
  cfg.act_bits = bits;
  cfg.precompute = precompute ? PrecomputeMode::on : PrecomputeMode::off;
  cfg.caching = caching ? CacheMode::on : CacheMode::off;
  cfg.order = order;
  return cfg;
}

// ---- criteria ----

bool lut_storage_exact() {
  return expect(lut_storage_bits(8, 64, 8) == 131072, "2^8*64*8 bits") &&
         expect(lut_storage_bits(8, 64, 8) == uint64_t(16) * 1024 * 8, "equals 16 kB");
}

bool compression_ratio_reproduction() {
  const double cr14 = compression_ratio(2729664, 8, 8, 64, 8, 8);
  bool ok = expect(std::abs(cr14 - 7.55) / 7.55 <= 0.10, "formula CR within 10% of 7.55");
  ok = expect(std::abs(cr14 - 7.6335) < 5e-3, "formula CR ~ 7.63") && ok;

  const ModelGraph g = graph_from_specs(resnet10_specs(), 1001);
  PoolConfig cfg;
  cfg.max_iter = 3;
  const CompressedModel m = compress_model(g, cfg);
  const CompressionReport r = model_compression_report(m);
  ok = expect(r.total_params == 665280, "inventory parameter count") && ok;
  ok = expect(std::abs(r.cr - 6.51) / 6.51 <= 0.15, "report CR within 15% of 6.51") && ok;
  return ok;
}

bool bit_serial_core_oracle() {
  std::mt19937_64 rng(2024);
  for (int it = 0; it < 200; ++it) {
    const uint32_t in_ch = 1 + uint32_t(rng() % 24);
    const uint32_t filters = 1 + uint32_t(rng() % 12);
    const uint32_t kernel = (rng() % 2) ? 3 : 1;
    const uint32_t stride = 1 + uint32_t(rng() % 2);
    const uint32_t pad = uint32_t(rng() % 2);
    const uint32_t s = 4u << (rng() % 5);
    const uint32_t hw = 4 + uint32_t(rng() % 4);
    SyntheticLayer l = make_layer(rng, in_ch, filters, hw, kernel, stride, pad, s);

    const LutTable lut = build_lut(l.pool, 32, LutOrder::input_oriented);
    ExecStats stats;
    const AccTensor out = conv_bitserial(l.input, l.spec, l.indices, l.pad_tail, lut,
                                         econfig(8, it % 2, it % 3 != 0),
                                         MemoryModel::mc_large(), stats);
    CompressedLayer cl;
    cl.spec = l.spec;
    cl.indices = l.indices;
    cl.pad_tail = l.pad_tail;
    const QWeights qw = reconstruct_layer_weights_q(cl, l.pool, 8, 8);
    const AccTensor ref = reference_conv_int(l.input, l.spec, qw);
    if (out.data != ref.data) return expect(false, "engine == integer reference, bit exact");
  }

  // exhaustive shift-accumulate identity, n = 4, m = 4, s = 4
  std::mt19937_64 rng2(7);
  WeightPool pool;
  pool.n = 4;
  pool.values.resize(16);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : pool.values) v = dist(rng2);
  const LutTable lut = build_lut(pool, 32, LutOrder::input_oriented);
  const QWeights qw = quantize_pool_weights(pool, 8);
  std::vector<uint8_t> q(4);
  for (uint32_t word = 0; word < 65536; ++word) {
    for (int i = 0; i < 4; ++i) q[i] = uint8_t((word >> (4 * i)) & 0xf);
    const BitPlaneMatrix planes = bit_decompose(q, 4);
    for (uint32_t s = 0; s < 4; ++s) {
      int64_t via_lut = 0;
      for (uint8_t j = 0; j < 4; ++j)
        via_lut += int64_t(lut_lookup(lut, planes.row(j), s)) << j;
      int64_t direct = 0;
      for (int i = 0; i < 4; ++i) direct += int64_t(q[i]) * qw.values[s * 4 + i];
      if (via_lut != direct) return expect(false, "exhaustive shift-accumulate identity");
    }
  }
  return true;
}

bool schedule_invariance() {
  std::mt19937_64 rng(3030);
  for (int it = 0; it < 50; ++it) {
    const uint32_t in_ch = 1 + uint32_t(rng() % 20);
    const uint32_t filters = 1 + uint32_t(rng() % 24);
    const uint32_t kernel = (rng() % 2) ? 3 : 1;
    const uint32_t s = 8u << (rng() % 4);
    SyntheticLayer l = make_layer(rng, in_ch, filters, 5, kernel, 1, kernel / 2, s);

    std::vector<AccTensor> outs;
    for (const LutOrder order : {LutOrder::input_oriented, LutOrder::weight_oriented}) {
      const LutTable lut = build_lut(l.pool, 8, order);
      for (bool pre : {false, true})
        for (bool cache : {false, true}) {
          ExecStats stats;
          outs.push_back(conv_bitserial(l.input, l.spec, l.indices, l.pad_tail, lut,
                                        econfig(8, pre, cache, order), MemoryModel::mc_large(),
                                        stats));
        }
    }
    for (size_t i = 1; i < outs.size(); ++i)
      if (outs[i].data != outs[0].data)
        return expect(false, "identical outputs across precompute x caching x order");
  }
  return true;
}

bool bitwidth_runtime_trend() {
  BenchLayer bench;  // 16x16, 128 channels, 128 filters, pool 64
  const std::vector<uint8_t> bits = {8, 7, 6, 5, 4, 3, 2, 1};
  const auto rows = speedup_curve(bench, MemoryModel::mc_large(), bits);
  bool ok = expect(rows.front().speedup_direct == 1.0, "normalized at 8 bits");
  for (size_t i = 1; i < rows.size(); ++i)
    ok = expect(rows[i].speedup_direct > rows[i - 1].speedup_direct,
                "strictly monotone as bits drop") &&
         ok;
  const double at1 = rows.back().speedup_direct;
  std::printf("    speedup at 1 bit: %.3f\n", at1);
  ok = expect(at1 >= 3.0 && at1 <= 5.0, "speedup at 1 bit within [3, 5]") && ok;
  ok = expect(at1 < 8.0, "below the 8x ideal") && ok;
  return ok;
}

bool caching_precompute_trends() {
  BenchLayer bench;
  const std::vector<uint32_t> filters = {32, 64, 128, 192};
  const auto rows = caching_curve(bench, MemoryModel::mc_large(), filters);
  bool ok = true;
  double prev = 0.0;
  for (const auto& row : rows) {
    std::printf("    filters %3u: caching %.3fx, precompute+caching %.3fx\n", row.filters,
                row.caching_speedup, row.precompute_speedup);
    ok = expect(row.caching_speedup > 1.0, "caching speedup > 1 everywhere") && ok;
    ok = expect(row.caching_speedup > prev, "caching speedup increases with filters") && ok;
    prev = row.caching_speedup;
  }
  ok = expect(rows[3].caching_speedup > 1.4, "caching speedup > 1.4 at 192") && ok;
  ok = expect(rows[0].precompute_speedup < rows[0].caching_speedup,
              "precompute hurts at 32 filters") &&
       ok;
  ok = expect(rows[1].precompute_speedup < rows[1].caching_speedup,
              "precompute hurts at 64 filters") &&
       ok;
  ok = expect(rows[2].precompute_speedup > rows[2].caching_speedup,
              "precompute wins at 128 filters") &&
       ok;
  ok = expect(rows[3].precompute_speedup > rows[3].caching_speedup,
              "precompute wins at 192 filters") &&
       ok;
  return ok;
}

bool lookup_count_law() {
  std::mt19937_64 rng(4040);
  bool ok = true;
  for (const auto& [in_ch, filters, hw, kernel, bits, s] :
       {std::tuple{16u, 8u, 5u, 3u, uint8_t(8), 32u}, {24u, 80u, 4u, 1u, uint8_t(5), 16u},
        {8u, 33u, 6u, 3u, uint8_t(3), 32u}}) {
    SyntheticLayer l = make_layer(rng, in_ch, filters, hw, kernel, 1, 0, s);
    const LutTable lut = build_lut(l.pool, 8, LutOrder::input_oriented);
    const uint32_t oh = (hw - kernel) + 1;
    const uint64_t groups = (in_ch + 7) / 8;
    const uint64_t instances = uint64_t(oh) * oh * kernel * kernel * groups;

    ExecStats direct, pre;
    conv_bitserial(l.input, l.spec, l.indices, l.pad_tail, lut, econfig(bits, false, true),
                   MemoryModel::mc_large(), direct);
    conv_bitserial(l.input, l.spec, l.indices, l.pad_tail, lut, econfig(bits, true, true),
                   MemoryModel::mc_large(), pre);
    ok = expect(direct.lut_lookups == instances * filters * bits,
                "direct lookups = filters * bits per group") &&
         ok;
    ok = expect(pre.lut_lookups == instances * (uint64_t(s) * bits + filters),
                "precompute lookups = S * bits + filters per group") &&
         ok;
    ok = expect(direct.unpack_ops == instances * uint64_t(bits) * 8,
                "unpack ops = groups * kh * kw * positions * bits * lanes") &&
         ok;
  }
  return ok;
}

bool active_cache_bound() {
  std::mt19937_64 rng(5050);
  SyntheticLayer l = make_layer(rng, 16, 8, 6, 3, 1, 1, 64);
  const LutTable lut = build_lut(l.pool, 8, LutOrder::input_oriented);
  ExecStats stats;
  conv_bitserial(l.input, l.spec, l.indices, l.pad_tail, lut, econfig(8, false, true),
                 MemoryModel::mc_large(), stats);
  return expect(stats.caching_used, "caching active") &&
         expect(stats.cache_bytes_peak <= 512, "active cache within 512 bytes") &&
         expect(stats.lut_lookups_flash == 0, "no flash table reads in the filter loop");
}

bool clustering_determinism_and_quality() {
  std::mt19937_64 rng(6060);
  const Tensor w = random_tensor({16, 3, 3, 32}, rng);
  const GroupedVectors g = group_weights_z(w, 8);
  const WeightPool a = cluster_kmeans_cosine(g, 64, 12345, 100);
  const WeightPool b = cluster_kmeans_cosine(g, 64, 12345, 100);
  bool ok = expect(a.values == b.values, "identical seeds give identical pools");

  // 12 vectors, two tight angular clusters, exhaustive 2^12 oracle
  std::uniform_real_distribution<float> jitter(-0.01f, 0.01f);
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 6; ++i) rows.push_back({1.0f + jitter(rng), jitter(rng), jitter(rng)});
  for (int i = 0; i < 6; ++i) rows.push_back({jitter(rng), 1.0f + jitter(rng), jitter(rng)});
  GroupedVectors gv;
  gv.n = 3;
  for (const auto& r : rows) gv.values.insert(gv.values.end(), r.begin(), r.end());

  auto cosd = [](std::span<const float> u, std::span<const float> v) {
    double du = 0, dv = 0, dot = 0;
    for (size_t i = 0; i < u.size(); ++i) {
      du += double(u[i]) * u[i];
      dv += double(v[i]) * v[i];
      dot += double(u[i]) * v[i];
    }
    return 1.0 - dot / (std::sqrt(du) * std::sqrt(dv));
  };

  double best_inertia = 1e18;
  std::vector<float> best_cent;
  for (uint32_t mask = 1; mask + 1 < (1u << 12); ++mask) {
    std::vector<float> cent(6, 0.0f);
    int counts[2] = {0, 0};
    for (uint32_t i = 0; i < 12; ++i) {
      const int side = (mask >> i) & 1;
      counts[side]++;
      for (int j = 0; j < 3; ++j) cent[side * 3 + j] += rows[i][j];
    }
    for (int side = 0; side < 2; ++side)
      for (int j = 0; j < 3; ++j) cent[side * 3 + j] /= float(counts[side]);
    double inertia = 0;
    for (uint32_t i = 0; i < 12; ++i) {
      const int side = (mask >> i) & 1;
      inertia += cosd(rows[i], std::span<const float>(cent.data() + side * 3, 3));
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_cent = cent;
    }
  }

  const WeightPool pool = cluster_kmeans_cosine(gv, 2, 777, 100);
  for (uint32_t c = 0; c < 2; ++c) {
    double nearest = 1e18;
    for (int side = 0; side < 2; ++side)
      nearest = std::min(
          nearest, cosd(pool.vec(c), std::span<const float>(best_cent.data() + side * 3, 3)));
    ok = expect(nearest < 1e-6, "centroids within 1e-6 angular distance of the optimum") && ok;
  }
  return ok;
}

bool recomposition_and_truncation() {
  // exhaustive at n = 4, m = 4
  std::vector<uint8_t> q4(4);
  for (uint32_t word = 0; word < 65536; ++word) {
    for (int i = 0; i < 4; ++i) q4[i] = uint8_t((word >> (4 * i)) & 0xf);
    if (bit_recompose(bit_decompose(q4, 4)) != q4)
      return expect(false, "exhaustive recomposition at n=4, m=4");
  }

  std::mt19937_64 rng(7070);
  WeightPool pool;
  pool.n = 8;
  pool.values.resize(16 * 8);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : pool.values) v = dist(rng);
  const LutTable lut = build_lut(pool, 32, LutOrder::input_oriented);

  std::vector<uint8_t> q(8), masked(8);
  for (int it = 0; it < 10000; ++it) {
    for (auto& v : q) v = uint8_t(rng() % 256);
    if (bit_recompose(bit_decompose(q, 8)) != q)
      return expect(false, "randomized recomposition at n=8, m=8");

    const uint32_t s = uint32_t(rng() % 16);
    const int keep = 1 + int(rng() % 8);
    for (int i = 0; i < 8; ++i) masked[i] = uint8_t(q[i] & (0xffu << (8 - keep)));
    const BitPlaneMatrix full = bit_decompose(q, 8);
    const BitPlaneMatrix zeroed = bit_decompose(masked, 8);
    int64_t top = 0, whole = 0;
    for (int j = 0; j < 8; ++j) {
      if (j >= 8 - keep) top += int64_t(lut_lookup(lut, full.row(uint8_t(j)), s)) << j;
      whole += int64_t(lut_lookup(lut, zeroed.row(uint8_t(j)), s)) << j;
    }
    if (top != whole) return expect(false, "truncation identity");
  }
  return true;
}

bool desk_scale_agreement() {
  std::mt19937_64 rng(8080);
  ModelGraph g;
  g.input_shape = {8, 8, 8};
  Layer first;
  first.spec = conv_spec(8, 16, 3, 1, 1, true);
  first.weights = random_tensor(first.spec.weight_shape(), rng, -0.35f, 0.35f);
  g.layers.push_back(std::move(first));
  Layer mid;
  mid.spec = conv_spec(16, 24, 3, 1, 1, true);
  mid.weights = random_tensor(mid.spec.weight_shape(), rng, -0.25f, 0.25f);
  g.layers.push_back(std::move(mid));
  Layer deep;
  deep.spec = conv_spec(24, 32, 3, 1, 1, true);
  deep.weights = random_tensor(deep.spec.weight_shape(), rng, -0.25f, 0.25f);
  g.layers.push_back(std::move(deep));
  Layer head;
  head.spec.kind = LayerKind::fully_connected;
  head.spec.in_ch = 8 * 8 * 32;
  head.spec.out_ch = 10;
  head.weights = random_tensor(head.spec.weight_shape(), rng, -0.2f, 0.2f);
  g.layers.push_back(std::move(head));

  CompressedModel m = compress_model(g, PoolConfig{});
  std::vector<Tensor> calib;
  for (int i = 0; i < 32; ++i) calib.push_back(random_tensor({8, 8, 8}, rng, 0.0f, 1.0f));
  calibrate_model(m, calib, 8);

  const EngineConfig cfg;  // 8-bit activations, 8-bit table
  const MemoryModel mem = MemoryModel::mc_large();
  int agree = 0;
  const int total = 500;
  for (int i = 0; i < total; ++i) {
    const Tensor x = random_tensor({8, 8, 8}, rng, 0.0f, 1.0f);
    const Tensor ref = run_network_reference(m, x);
    const RunResult run = run_network(m, x, cfg, mem);
    const auto arg = [](const Tensor& t) {
      return std::distance(t.data.begin(), std::max_element(t.data.begin(), t.data.end()));
    };
    if (arg(ref) == arg(run.output)) ++agree;
  }
  std::printf("    top-1 agreement: %d / %d\n", agree, total);
  return expect(agree >= int(0.95 * total), "float reference vs 8-bit engine agreement >= 95%");
}

}  // namespace

int main() {
  criterion(1, "lookup table storage is exactly 16 kB at (8, 64, 8)", lut_storage_exact);
  criterion(2, "compression ratios reproduce the published accounting",
            compression_ratio_reproduction);
  criterion(3, "bit-serial engine is bit-exact against the integer reference",
            bit_serial_core_oracle);
  criterion(4, "outputs are schedule invariant", schedule_invariance);
  criterion(5, "speedup grows monotonically as activation bits drop", bitwidth_runtime_trend);
  criterion(6, "caching and precompute trends follow the filter count",
            caching_precompute_trends);
  criterion(7, "lookup counters obey the per-branch law exactly", lookup_count_law);
  criterion(8, "the active cache stays within 512 bytes and absorbs table traffic",
            active_cache_bound);
  criterion(9, "clustering is deterministic and matches the exhaustive optimum",
            clustering_determinism_and_quality);
  criterion(10, "recomposition and truncation identities hold", recomposition_and_truncation);
  criterion(11, "desk-scale fixture: float reference and 8-bit engine agree on top-1",
            desk_scale_agreement);

  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
