#include "wpool/quant.hpp"

#include <algorithm>
#include <cmath>

#include "byteio.hpp"
#include "wpool/error.hpp"

namespace wpool {

std::pair<QTensor, QuantParams> quantize_activations(const Tensor& t, uint8_t bits,
                                                     ActRange range) {
  if (bits < 1 || bits > 8) fail(Errc::invalid_config, "activation bitwidth out of range 1..8");
  if (!(range.hi > 0)) fail(Errc::invalid_config, "activation range hi must be positive");
  const int64_t qmax = (int64_t(1) << bits) - 1;
  QuantParams params;
  params.bits = bits;
  params.scale = range.hi / float(qmax);
  QTensor q;
  q.shape = t.shape;
  q.bits = bits;
  q.data.resize(t.data.size());
  for (size_t i = 0; i < t.data.size(); ++i) {
    const int64_t v = std::llround(double(t.data[i]) * double(qmax) / double(range.hi));
    q.data[i] = uint8_t(std::clamp<int64_t>(v, 0, qmax));
  }
  return {std::move(q), params};
}

QTensor quantize_with_params(const Tensor& t, const QuantParams& params) {
  if (params.bits < 1 || params.bits > 8)
    fail(Errc::invalid_config, "activation bitwidth out of range 1..8");
  if (!(params.scale > 0)) fail(Errc::invalid_config, "activation scale must be positive");
  const int64_t qmax = (int64_t(1) << params.bits) - 1;
  QTensor q;
  q.shape = t.shape;
  q.bits = params.bits;
  q.data.resize(t.data.size());
  const double inv = 1.0 / double(params.scale);
  for (size_t i = 0; i < t.data.size(); ++i) {
    const int64_t v = std::llround(double(t.data[i]) * inv);
    q.data[i] = uint8_t(std::clamp<int64_t>(v, 0, qmax));
  }
  return q;
}

namespace {

double percentile(const std::vector<double>& sorted, double p) {
  const double rank = p / 100.0 * double(sorted.size() - 1);
  const size_t lo = size_t(rank);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = rank - double(lo);
  return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

double quant_mse(std::span<const float> values, uint8_t bits, double hi) {
  const double qmax = double((1u << bits) - 1u);
  const double step = hi / qmax;
  double sum = 0;
  for (float x : values) {
    const double q = std::clamp(std::round(double(x) / step), 0.0, qmax);
    const double err = double(x) - q * step;
    sum += err * err;
  }
  return sum / double(values.size());
}

}  // namespace

ActRange search_activation_range(std::span<const float> calib, uint8_t bits,
                                 std::vector<std::string>* warnings) {
  if (calib.empty()) fail(Errc::insufficient_data, "empty calibration set");
  if (bits < 1 || bits > 8) fail(Errc::invalid_config, "activation bitwidth out of range 1..8");

  std::vector<double> mags(calib.size());
  for (size_t i = 0; i < calib.size(); ++i) mags[i] = std::fabs(double(calib[i]));
  std::sort(mags.begin(), mags.end());
  if (mags.back() <= 0) {
    if (warnings) warnings->push_back("all-zero calibration set; using hi = 1");
    return {1.0f};
  }

  std::vector<double> candidates;
  for (double p : {99.0, 99.5, 99.9, 99.99, 100.0}) {
    const double c = percentile(mags, p);
    if (c > 0 && (candidates.empty() || c != candidates.back())) candidates.push_back(c);
  }

  double best_hi = candidates[0];
  double best_mse = quant_mse(calib, bits, best_hi);
  size_t best_idx = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    const double m = quant_mse(calib, bits, candidates[i]);
    if (m < best_mse) {
      best_mse = m;
      best_hi = candidates[i];
      best_idx = i;
    }
  }

  // golden-section refinement around the winning candidate
  double a = best_idx > 0 ? candidates[best_idx - 1] : 0.5 * best_hi;
  double b = best_idx + 1 < candidates.size() ? candidates[best_idx + 1] : best_hi;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = quant_mse(calib, bits, x1);
  double f2 = quant_mse(calib, bits, x2);
  for (int it = 0; it < 20; ++it) {
    if (f1 < best_mse) {
      best_mse = f1;
      best_hi = x1;
    }
    if (f2 < best_mse) {
      best_mse = f2;
      best_hi = x2;
    }
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = quant_mse(calib, bits, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = quant_mse(calib, bits, x2);
    }
  }
  return {float(best_hi)};
}

BitPlaneMatrix bit_decompose(std::span<const uint8_t> q, uint8_t bits) {
  if (bits < 1 || bits > 8) fail(Errc::invalid_config, "bitwidth out of range 1..8");
  if (q.size() > 24) fail(Errc::invalid_config, "group width above 24 is not supported");
  const uint32_t qmax = (1u << bits) - 1u;
  BitPlaneMatrix planes;
  planes.rows = bits;
  planes.width = uint8_t(q.size());
  for (size_t i = 0; i < q.size(); ++i) {
    if (q[i] > qmax) fail(Errc::out_of_range, "value exceeds 2^bits - 1");
    for (uint8_t j = 0; j < bits; ++j)
      planes.bits[j] |= uint32_t((q[i] >> j) & 1u) << i;
  }
  return planes;
}

std::vector<uint8_t> bit_recompose(const BitPlaneMatrix& planes) {
  std::vector<uint8_t> q(planes.width, 0);
  for (uint8_t i = 0; i < planes.width; ++i)
    for (uint8_t j = 0; j < planes.rows; ++j)
      q[i] |= uint8_t(((planes.bits[j] >> i) & 1u) << j);
  return q;
}

QWeights quantize_pool_weights(const WeightPool& pool, uint8_t weight_bits) {
  return quantize_weights_pow2(pool.values, {pool.size(), pool.n}, weight_bits);
}

namespace {

// round half away from zero for value / 2^shift, exact in integers
int64_t round_shift(int64_t v, int shift) {
  if (shift == 0) return v;
  const int64_t half = int64_t(1) << (shift - 1);
  return v >= 0 ? (v + half) >> shift : -((-v + half) >> shift);
}

}  // namespace

LutTable build_lut(const WeightPool& pool, uint8_t entry_bits, LutOrder order,
                   uint8_t weight_bits) {
  if (entry_bits != 4 && entry_bits != 8 && entry_bits != 16 && entry_bits != 32)
    fail(Errc::invalid_config, "LUT bitwidth must be one of 4, 8, 16, 32");
  if (pool.size() == 0) fail(Errc::insufficient_data, "empty weight pool");
  if (pool.n < 2 || pool.n > 16)
    fail(Errc::invalid_config, "LUT group width out of supported range 2..16");

  const QWeights qw = quantize_pool_weights(pool, weight_bits);
  const uint32_t patterns = 1u << pool.n;
  const uint32_t s = pool.size();

  // exact integer dot products per (pattern, vector)
  std::vector<int64_t> raw(size_t(patterns) * s);
  int64_t maxabs = 0;
  for (uint32_t v = 0; v < s; ++v) {
    const int32_t* wv = qw.values.data() + size_t(v) * pool.n;
    for (uint32_t p = 0; p < patterns; ++p) {
      int64_t dot = 0;
      for (uint32_t i = 0; i < pool.n; ++i)
        if (p & (1u << i)) dot += wv[i];
      raw[size_t(p) * s + v] = dot;
      maxabs = std::max(maxabs, std::abs(dot));
    }
  }

  const int64_t limit = (int64_t(1) << (entry_bits - 1)) - 1;
  int shift = 0;
  while (std::abs(round_shift(maxabs, shift)) > limit) ++shift;

  LutTable lut;
  lut.order = order;
  lut.n = pool.n;
  lut.s = s;
  lut.entry_bits = entry_bits;
  lut.weight_bits = weight_bits;
  lut.entry_scale_exp = int8_t(shift);
  lut.weight_scale_exp = int8_t(qw.scale_exp);
  lut.entries.resize(raw.size());
  bool any_nonzero = false;
  for (uint32_t p = 0; p < patterns; ++p) {
    for (uint32_t v = 0; v < s; ++v) {
      const int64_t e =
          std::clamp(round_shift(raw[size_t(p) * s + v], shift), -limit - 1, limit);
      lut.entries[lut.index_of(p, v)] = int32_t(e);
      any_nonzero |= e != 0;
    }
  }
  if (maxabs != 0 && !any_nonzero)
    fail(Errc::invalid_config, "LUT bitwidth too narrow: every entry rescaled to zero");
  return lut;
}

const char* lut_order_name(LutOrder order) {
  return order == LutOrder::input_oriented ? "input" : "weight";
}

size_t LutTable::index_of(uint32_t pattern, uint32_t pool_index) const {
  return order == LutOrder::input_oriented
             ? size_t(pattern) * s + pool_index
             : (size_t(pool_index) << n) + pattern;
}

int32_t LutTable::at(uint32_t pattern, uint32_t pool_index) const {
  return entries[index_of(pattern, pool_index)];
}

uint64_t LutTable::storage_bits() const {
  return (uint64_t(1) << n) * s * entry_bits;
}

double LutTable::result_scale() const {
  return std::ldexp(1.0, entry_scale_exp + weight_scale_exp);
}

int32_t lut_lookup(const LutTable& lut, uint32_t pattern, uint32_t pool_index) {
  if (pattern >= (1u << lut.n)) fail(Errc::out_of_range, "pattern exceeds 2^N - 1");
  if (pool_index >= lut.s) fail(Errc::out_of_range, "pool index exceeds S - 1");
  return lut.at(pattern, pool_index);
}

namespace {
constexpr uint8_t kLutMagic[4] = {'W', 'P', 'L', 'T'};
constexpr uint16_t kLutVersion = 1;
}  // namespace

std::vector<uint8_t> lut_to_bytes(const LutTable& lut) {
  detail::ByteWriter w;
  w.bytes(kLutMagic);
  w.u16(kLutVersion);
  w.u8(uint8_t(lut.order));
  w.u8(uint8_t(lut.n));
  w.u32(lut.s);
  w.u8(lut.entry_bits);
  w.u8(lut.weight_bits);
  w.i8(lut.entry_scale_exp);
  w.i8(lut.weight_scale_exp);
  if (lut.entry_bits == 4) {
    for (size_t i = 0; i < lut.entries.size(); i += 2) {
      const uint8_t lo = uint8_t(lut.entries[i]) & 0x0f;
      const uint8_t hi =
          i + 1 < lut.entries.size() ? uint8_t(lut.entries[i + 1]) & 0x0f : 0;
      w.u8(uint8_t(lo | (hi << 4)));
    }
  } else {
    for (int32_t e : lut.entries) {
      if (lut.entry_bits == 8)
        w.u8(uint8_t(e));
      else if (lut.entry_bits == 16)
        w.u16(uint16_t(e));
      else
        w.u32(uint32_t(e));
    }
  }
  return w.buf;
}

LutTable lut_from_bytes(std::span<const uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.bytes(4);
  for (int i = 0; i < 4; ++i)
    if (magic[i] != kLutMagic[i]) fail(Errc::format_error, "bad magic, not a LUT blob");
  if (r.u16() != kLutVersion) fail(Errc::format_error, "unsupported LUT blob version");

  LutTable lut;
  const uint8_t order = r.u8();
  if (order > 1) fail(Errc::format_error, "unknown LUT order tag");
  lut.order = LutOrder(order);
  lut.n = r.u8();
  lut.s = r.u32();
  lut.entry_bits = r.u8();
  lut.weight_bits = r.u8();
  lut.entry_scale_exp = r.i8();
  lut.weight_scale_exp = r.i8();
  if (lut.n < 2 || lut.n > 16) fail(Errc::format_error, "LUT group width out of range");
  if (lut.entry_bits != 4 && lut.entry_bits != 8 && lut.entry_bits != 16 &&
      lut.entry_bits != 32)
    fail(Errc::format_error, "LUT entry width out of range");

  const size_t count = (size_t(1) << lut.n) * lut.s;
  if (lut.entry_bits == 4)
    r.demand((count + 1) / 2);
  else
    r.demand_elems(count, lut.entry_bits / 8);
  lut.entries.resize(count);
  auto sign_extend = [](uint32_t v, int bits) {
    const uint32_t m = 1u << (bits - 1);
    return int32_t((v ^ m)) - int32_t(m);
  };
  if (lut.entry_bits == 4) {
    for (size_t i = 0; i < count; i += 2) {
      const uint8_t b = r.u8();
      lut.entries[i] = sign_extend(b & 0x0f, 4);
      if (i + 1 < count) lut.entries[i + 1] = sign_extend(b >> 4, 4);
    }
  } else {
    for (auto& e : lut.entries) {
      if (lut.entry_bits == 8)
        e = sign_extend(r.u8(), 8);
      else if (lut.entry_bits == 16)
        e = sign_extend(r.u16(), 16);
      else
        e = int32_t(r.u32());
    }
  }
  if (r.remaining() != 0) fail(Errc::format_error, "trailing bytes in LUT blob");
  return lut;
}

void save_lut(const LutTable& lut, const std::filesystem::path& path) {
  detail::write_file(path, lut_to_bytes(lut));
}

LutTable load_lut(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return lut_from_bytes(bytes);
}

}  // namespace wpool
