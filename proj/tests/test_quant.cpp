#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "wpool/error.hpp"
#include "wpool/quant.hpp"

using namespace wpool;
using namespace wpool::test;

namespace {

double mse_at(std::span<const float> values, uint8_t bits, double hi) {
  const double qmax = double((1u << bits) - 1u);
  double sum = 0;
  for (float x : values) {
    const double q = std::clamp(std::round(double(x) * qmax / hi), 0.0, qmax);
    const double err = double(x) - q * hi / qmax;
    sum += err * err;
  }
  return sum / double(values.size());
}

WeightPool pool_from_rows(const std::vector<std::vector<float>>& rows) {
  WeightPool pool;
  pool.n = uint32_t(rows[0].size());
  for (const auto& r : rows) pool.values.insert(pool.values.end(), r.begin(), r.end());
  return pool;
}

// direct dot product of pattern bits with a quantized pool vector
int64_t direct_dot(uint32_t pattern, std::span<const int32_t> w) {
  int64_t dot = 0;
  for (size_t i = 0; i < w.size(); ++i)
    if (pattern & (1u << i)) dot += w[i];
  return dot;
}

}  // namespace

TEST_CASE("activation quantization hits the range endpoints") {
  Tensor t = Tensor::zeros({1, 1, 3});
  t.data = {1.0f, 0.0f, 0.5f};
  const auto [q8, p8] = quantize_activations(t, 8, {1.0f});
  CHECK(q8.data[0] == 255);
  CHECK(q8.data[1] == 0);
  CHECK(p8.scale == doctest::Approx(1.0f / 255.0f));

  for (uint8_t bits = 1; bits <= 8; ++bits) {
    const auto [q, p] = quantize_activations(t, bits, {1.0f});
    CHECK(q.data[1] == 0);
    CHECK(q.data[0] == (1u << bits) - 1u);
  }

  // round half away from zero: 0.5 * 15 = 7.5 rounds to 8
  const auto [q4, p4] = quantize_activations(t, 4, {1.0f});
  CHECK(q4.data[2] == 8);
}

TEST_CASE("negative activations clamp to zero") {
  Tensor t = Tensor::zeros({1, 1, 2});
  t.data = {-3.0f, 2.0f};
  const auto [q, p] = quantize_activations(t, 8, {1.0f});
  CHECK(q.data[0] == 0);
  CHECK(q.data[1] == 255);  // clipped at hi
}

TEST_CASE("non-positive ranges are rejected") {
  Tensor t = Tensor::zeros({1, 1, 1});
  CHECK_THROWS_AS(quantize_activations(t, 8, {0.0f}), Error);
  CHECK_THROWS_AS(quantize_activations(t, 8, {-1.0f}), Error);
  CHECK_THROWS_AS(quantize_activations(t, 9, {1.0f}), Error);
}

TEST_CASE("range search lands near the top of a uniform distribution") {
  std::vector<float> calib(100001);
  for (size_t i = 0; i < calib.size(); ++i) calib[i] = float(i) / 100000.0f;
  const ActRange r = search_activation_range(calib, 8);
  CHECK(r.hi >= 0.97f);
  CHECK(r.hi <= 1.0f);
}

TEST_CASE("range search returns the exact value for a singleton set") {
  const std::vector<float> calib = {5.0f};
  const ActRange r = search_activation_range(calib, 8);
  CHECK(r.hi == 5.0f);
}

TEST_CASE("range search clips a rare extreme outlier") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> calib(4'000'000);
  for (auto& v : calib) v = dist(rng);
  calib.push_back(999.0f);

  const ActRange r = search_activation_range(calib, 4);
  CHECK(r.hi < 2.0f);

  // numeric cross-check: the clipped range must beat both fixed choices
  const double found = mse_at(calib, 4, r.hi);
  CHECK(found <= mse_at(calib, 4, 1.0));
  CHECK(found <= mse_at(calib, 4, 999.0));
}

TEST_CASE("range search falls back to 1 on all-zero data with a warning") {
  const std::vector<float> calib(64, 0.0f);
  std::vector<std::string> warnings;
  const ActRange r = search_activation_range(calib, 8, &warnings);
  CHECK(r.hi == 1.0f);
  REQUIRE(warnings.size() == 1);

  CHECK_THROWS_AS(search_activation_range({}, 8), Error);
}

TEST_CASE("bit decomposition of zero is all-zero rows") {
  const std::vector<uint8_t> q(8, 0);
  const BitPlaneMatrix planes = bit_decompose(q, 8);
  CHECK(planes.rows == 8);
  CHECK(planes.width == 8);
  for (uint8_t j = 0; j < 8; ++j) CHECK(planes.row(j) == 0);
}

TEST_CASE("bit decomposition of [5, 3] at 3 bits") {
  const std::vector<uint8_t> q = {5, 3};
  const BitPlaneMatrix planes = bit_decompose(q, 3);
  CHECK(planes.rows == 3);
  CHECK(planes.row(0) == 0b11);  // LSBs: 1, 1
  CHECK(planes.row(1) == 0b10);  // 0, 1
  CHECK(planes.row(2) == 0b01);  // 1, 0
  CHECK(bit_recompose(planes) == q);
}

TEST_CASE("an 8-element 8-bit vector decomposes into an 8x8 bit matrix") {
  std::mt19937_64 rng(1);
  std::vector<uint8_t> q(8);
  for (auto& v : q) v = uint8_t(rng() % 256);
  const BitPlaneMatrix planes = bit_decompose(q, 8);
  CHECK(planes.rows == 8);
  CHECK(planes.width == 8);
  for (uint8_t j = 0; j < 8; ++j) CHECK(planes.row(j) < 256);
  CHECK(bit_recompose(planes) == q);
}

TEST_CASE("bit decomposition rejects out-of-range values") {
  const std::vector<uint8_t> q = {9};
  CHECK_THROWS_AS(bit_decompose(q, 3), Error);
}

TEST_CASE("recomposition identity holds exhaustively at n=4 m=4") {
  std::vector<uint8_t> q(4);
  for (uint32_t word = 0; word < 65536; ++word) {
    for (int i = 0; i < 4; ++i) q[i] = uint8_t((word >> (4 * i)) & 0xf);
    const BitPlaneMatrix planes = bit_decompose(q, 4);
    CHECK(bit_recompose(planes) == q);
  }
}

TEST_CASE("recomposition identity holds on random 8x8 vectors") {
  std::mt19937_64 rng(2);
  std::vector<uint8_t> q(8);
  for (int it = 0; it < 10000; ++it) {
    for (auto& v : q) v = uint8_t(rng() % 256);
    CHECK(bit_recompose(bit_decompose(q, 8)) == q);
  }
}

TEST_CASE("the default table stores 16 kB") {
  std::mt19937_64 rng(3);
  const Tensor w = random_tensor({16, 3, 3, 64}, rng);
  const WeightPool pool = cluster_kmeans_cosine(group_weights_z(w, 8), 64, 1, 20);
  const LutTable lut = build_lut(pool, 8, LutOrder::input_oriented);
  CHECK(lut.storage_bits() == 131072);  // 2^8 * 64 * 8 bits
  CHECK(lut.storage_bits() / 8 == 16 * 1024);
}

TEST_CASE("pattern zero looks up zero for every pool vector") {
  std::mt19937_64 rng(4);
  const Tensor w = random_tensor({8, 1, 1, 64}, rng);
  const WeightPool pool = cluster_kmeans_cosine(group_weights_z(w, 8), 16, 2, 50);
  for (const LutOrder order : {LutOrder::input_oriented, LutOrder::weight_oriented}) {
    const LutTable lut = build_lut(pool, 8, order);
    for (uint32_t s = 0; s < lut.s; ++s) CHECK(lut_lookup(lut, 0, s) == 0);
  }
}

TEST_CASE("a hand-checked 4-wide table matches direct dot products") {
  const WeightPool pool = pool_from_rows({{1, 2, 3, 4}, {-1, 0, 2, -3}});
  const LutTable lut = build_lut(pool, 32, LutOrder::input_oriented);
  const QWeights qw = quantize_pool_weights(pool, 8);

  // elements 1 and 3 selected: 2 + 4 = 6 in real units
  const uint32_t p = 0b1010;
  const double dequant = double(lut_lookup(lut, p, 0)) * lut.result_scale();
  CHECK(dequant == doctest::Approx(6.0).epsilon(1e-6));

  for (uint32_t pattern = 0; pattern < 16; ++pattern)
    for (uint32_t s = 0; s < 2; ++s)
      CHECK(int64_t(lut_lookup(lut, pattern, s)) ==
            direct_dot(pattern, std::span(qw.values).subspan(s * 4, 4)));
}

TEST_CASE("both orders hold the same entries behind the same lookups") {
  std::mt19937_64 rng(5);
  const Tensor w = random_tensor({4, 1, 1, 16}, rng);
  const WeightPool pool = cluster_kmeans_cosine(group_weights_z(w, 4), 4, 3, 50);
  const LutTable a = build_lut(pool, 8, LutOrder::input_oriented);
  const LutTable b = build_lut(pool, 8, LutOrder::weight_oriented);
  for (uint32_t p = 0; p < 16; ++p)
    for (uint32_t s = 0; s < 4; ++s) CHECK(lut_lookup(a, p, s) == lut_lookup(b, p, s));

  // declared block structure
  for (uint32_t p = 0; p < 16; ++p)
    for (uint32_t s = 0; s < 4; ++s) {
      CHECK(a.entries[p * 4 + s] == a.at(p, s));
      CHECK(b.entries[s * 16 + p] == b.at(p, s));
    }
}

TEST_CASE("wide-entry lookups equal the direct dot product oracle") {
  std::mt19937_64 rng(6);
  const Tensor w = random_tensor({16, 3, 3, 32}, rng);
  const WeightPool pool = cluster_kmeans_cosine(group_weights_z(w, 8), 64, 4, 50);
  const LutTable lut = build_lut(pool, 32, LutOrder::input_oriented);
  CHECK(lut.entry_scale_exp == 0);  // 32-bit entries never need rescaling here
  const QWeights qw = quantize_pool_weights(pool, 8);
  for (int it = 0; it < 1000; ++it) {
    const uint32_t p = uint32_t(rng() % 256);
    const uint32_t s = uint32_t(rng() % 64);
    CHECK(int64_t(lut_lookup(lut, p, s)) ==
          direct_dot(p, std::span(qw.values).subspan(s * 8, 8)));
  }
}

TEST_CASE("lookups validate their arguments") {
  const WeightPool pool = pool_from_rows({{1, 2}, {3, 4}});
  const LutTable lut = build_lut(pool, 8, LutOrder::input_oriented);
  CHECK_THROWS_AS(lut_lookup(lut, 4, 0), Error);
  CHECK_THROWS_AS(lut_lookup(lut, 0, 2), Error);
  CHECK_THROWS_AS(build_lut(pool, 5, LutOrder::input_oriented), Error);
}

TEST_CASE("narrow entries saturate instead of wrapping") {
  // large dynamic range forces a coarse power-of-two rescale at 4 bits
  const WeightPool pool = pool_from_rows({{100, 100, 100, 100}, {1, 1, 1, 1}});
  const LutTable lut = build_lut(pool, 4, LutOrder::input_oriented);
  for (int32_t e : lut.entries) {
    CHECK(e <= 7);
    CHECK(e >= -8);
  }
  // the small vector's entries collapse toward zero at this scale
  CHECK(lut_lookup(lut, 0b1111, 0) > 0);
}

TEST_CASE("shift-accumulate over bit rows equals the integer dot product exhaustively") {
  const WeightPool pool = pool_from_rows(
      {{0.5f, -0.25f, 0.75f, -1.0f}, {0.1f, 0.2f, -0.3f, 0.4f}, {1, 1, -1, -1}, {-0.7f, 0, 0.6f, 0.2f}});
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
      CHECK(via_lut == direct);
    }
  }
}

TEST_CASE("evaluating only the top rows equals zeroing the low bits") {
  std::mt19937_64 rng(7);
  const Tensor w = random_tensor({8, 1, 1, 64}, rng);
  const WeightPool pool = cluster_kmeans_cosine(group_weights_z(w, 8), 16, 5, 50);
  const LutTable lut = build_lut(pool, 32, LutOrder::input_oriented);

  std::vector<uint8_t> q(8), masked(8);
  for (int it = 0; it < 2000; ++it) {
    for (auto& v : q) v = uint8_t(rng() % 256);
    const uint32_t s = uint32_t(rng() % 16);
    const int keep = 1 + int(rng() % 8);
    const uint8_t mask = uint8_t(0xff << (8 - keep));
    for (int i = 0; i < 8; ++i) masked[i] = uint8_t(q[i] & mask);

    const BitPlaneMatrix full = bit_decompose(q, 8);
    const BitPlaneMatrix low_zeroed = bit_decompose(masked, 8);

    int64_t top_only = 0;
    for (int j = 8 - keep; j < 8; ++j)
      top_only += int64_t(lut_lookup(lut, full.row(uint8_t(j)), s)) << j;
    int64_t full_masked = 0;
    for (int j = 0; j < 8; ++j)
      full_masked += int64_t(lut_lookup(lut, low_zeroed.row(uint8_t(j)), s)) << j;
    CHECK(top_only == full_masked);
  }
}

TEST_CASE("LUT blobs round trip at every entry width") {
  TempDir dir("lut");
  std::mt19937_64 rng(8);
  const Tensor w = random_tensor({8, 1, 1, 32}, rng);
  const WeightPool pool = cluster_kmeans_cosine(group_weights_z(w, 8), 8, 6, 50);
  for (uint8_t bits : {4, 8, 16, 32}) {
    for (const LutOrder order : {LutOrder::input_oriented, LutOrder::weight_oriented}) {
      const LutTable lut = build_lut(pool, bits, order);
      const auto path = dir.file("t" + std::to_string(bits) + std::to_string(int(order)));
      save_lut(lut, path);
      const LutTable back = load_lut(path);
      CHECK(back.order == lut.order);
      CHECK(back.n == lut.n);
      CHECK(back.s == lut.s);
      CHECK(back.entry_bits == lut.entry_bits);
      CHECK(back.entry_scale_exp == lut.entry_scale_exp);
      CHECK(back.weight_scale_exp == lut.weight_scale_exp);
      CHECK(back.entries == lut.entries);
    }
  }
}
