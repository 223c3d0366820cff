#include "wpool/pool_io.hpp"

#include <string>

#include "byteio.hpp"

namespace wpool {

namespace {

constexpr uint8_t kMagic[4] = {'W', 'P', 'N', 'C'};
constexpr uint16_t kVersion = 1;

constexpr uint8_t kFlagRelu = 1u << 0;
constexpr uint8_t kFlagBias = 1u << 1;
constexpr uint8_t kFlagExcluded = 1u << 2;
constexpr uint8_t kFlagQuant = 1u << 3;

constexpr uint8_t kModelFlagLut = 1u << 0;

void write_shape(detail::ByteWriter& w, std::span<const uint32_t> shape) {
  w.u8(uint8_t(shape.size()));
  for (uint32_t e : shape) w.u32(e);
}

std::vector<uint32_t> read_shape(detail::ByteReader& r) {
  const uint8_t ndim = r.u8();
  if (ndim == 0 || ndim > 4) fail(Errc::format_error, "shape rank out of range");
  std::vector<uint32_t> shape(ndim);
  for (auto& e : shape) e = r.u32();
  return shape;
}

}  // namespace

void save_compressed(const CompressedModel& model, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kVersion);
  w.u16(model.calibrated() ? 2 : 1);
  w.u8(model.lut ? kModelFlagLut : 0);
  w.u32(model.group_size);
  w.u32(model.pool_size);
  w.u64(model.seed);
  write_shape(w, model.input_shape);

  w.u32(model.pool.size());
  w.u32(model.pool.n);
  for (float v : model.pool.values) w.f32(v);
  w.u64(model.pool.provenance.seed);
  w.u32(model.pool.provenance.iterations);
  w.f64(model.pool.provenance.inertia);

  const uint8_t index_bytes = model.pool.size() > 256 ? 2 : 1;
  w.u32(uint32_t(model.layers.size()));
  for (const CompressedLayer& l : model.layers) {
    w.u8(uint8_t(l.spec.kind));
    uint8_t flags = 0;
    if (l.spec.has_relu) flags |= kFlagRelu;
    if (l.bias) flags |= kFlagBias;
    if (l.excluded) flags |= kFlagExcluded;
    if (l.qparams) flags |= kFlagQuant;
    w.u8(flags);
    w.u32(l.spec.in_ch);
    w.u32(l.spec.out_ch);
    w.u32(l.spec.kh);
    w.u32(l.spec.kw);
    w.u32(l.spec.stride);
    w.u32(l.spec.pad);
    w.u32(l.pad_tail);
    if (l.excluded) {
      write_shape(w, l.raw_weights.shape);
      w.u64(l.raw_weights.data.size());
      for (float v : l.raw_weights.data) w.f32(v);
    } else {
      w.u8(index_bytes);
      w.u64(l.indices.size());
      for (uint32_t idx : l.indices) {
        if (index_bytes == 1)
          w.u8(uint8_t(idx));
        else
          w.u16(uint16_t(idx));
      }
    }
    if (l.bias) {
      w.u32(uint32_t(l.bias->size()));
      for (float v : *l.bias) w.f32(v);
    }
    if (l.qparams) {
      w.u8(l.qparams->bits);
      w.f32(l.qparams->scale);
    }
  }

  if (model.lut) {
    const auto blob = lut_to_bytes(*model.lut);
    w.u64(blob.size());
    w.bytes(blob);
  }
  detail::write_file(path, w.buf);
}

CompressedModel load_compressed(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes);

  const auto magic = r.bytes(4);
  for (int i = 0; i < 4; ++i)
    if (magic[i] != kMagic[i]) fail(Errc::format_error, "bad magic, not a WPNC container");
  if (r.u16() != kVersion) fail(Errc::format_error, "unsupported WPNC version");
  r.u16();  // content revision, derived from payload on save
  const uint8_t model_flags = r.u8();

  CompressedModel model;
  model.group_size = r.u32();
  model.pool_size = r.u32();
  model.seed = r.u64();
  model.input_shape = read_shape(r);

  const uint32_t pool_count = r.u32();
  model.pool.n = r.u32();
  if (model.pool.n > 64) fail(Errc::format_error, "pool vector width out of range");
  r.demand_elems(uint64_t(pool_count) * model.pool.n, 4);
  model.pool.values.resize(size_t(pool_count) * model.pool.n);
  for (auto& v : model.pool.values) v = r.f32();
  model.pool.provenance.seed = r.u64();
  model.pool.provenance.iterations = r.u32();
  model.pool.provenance.inertia = r.f64();

  const uint32_t count = r.u32();
  if (count == 0) fail(Errc::format_error, "compressed model has zero layers");
  r.demand_elems(count, 30);  // record floor: tags plus seven u32 fields
  model.layers.resize(count);
  model.layer_stats.resize(count);
  for (CompressedLayer& l : model.layers) {
    const uint8_t kind = r.u8();
    if (kind > uint8_t(LayerKind::fully_connected))
      fail(Errc::format_error, "unknown layer kind tag " + std::to_string(kind));
    l.spec.kind = LayerKind(kind);
    const uint8_t flags = r.u8();
    l.spec.has_relu = flags & kFlagRelu;
    l.excluded = flags & kFlagExcluded;
    l.spec.in_ch = r.u32();
    l.spec.out_ch = r.u32();
    l.spec.kh = r.u32();
    l.spec.kw = r.u32();
    l.spec.stride = r.u32();
    l.spec.pad = r.u32();
    l.pad_tail = r.u32();
    if (l.excluded) {
      l.raw_weights.shape = read_shape(r);
      const uint64_t n = r.u64();
      if (n != shape_size(l.raw_weights.shape))
        fail(Errc::shape_mismatch, "tensor payload length does not match shape");
      r.demand_elems(n, 4);
      l.raw_weights.data.resize(n);
      for (auto& v : l.raw_weights.data) v = r.f32();
    } else {
      const uint8_t index_bytes = r.u8();
      if (index_bytes != 1 && index_bytes != 2)
        fail(Errc::format_error, "index width must be 1 or 2 bytes");
      const uint64_t n = r.u64();
      r.demand_elems(n, index_bytes);
      l.indices.resize(n);
      for (auto& idx : l.indices) {
        idx = index_bytes == 1 ? r.u8() : r.u16();
        if (idx >= pool_count) fail(Errc::out_of_range, "pool index out of range");
      }
    }
    if (flags & kFlagBias) {
      const uint32_t blen = r.u32();
      r.demand_elems(blen, 4);
      std::vector<float> bias(blen);
      for (auto& v : bias) v = r.f32();
      l.bias = std::move(bias);
    }
    if (flags & kFlagQuant) {
      QuantParams qp;
      qp.bits = r.u8();
      qp.scale = r.f32();
      l.qparams = qp;
    }
  }

  if (model_flags & kModelFlagLut) {
    const uint64_t blob_len = r.u64();
    r.demand(blob_len);
    model.lut = lut_from_bytes(r.bytes(blob_len));
  }
  if (r.remaining() != 0) fail(Errc::format_error, "trailing bytes in WPNC container");
  return model;
}

}  // namespace wpool
