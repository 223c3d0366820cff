#include "wpool/model_io.hpp"

#include <string>

#include "byteio.hpp"

namespace wpool {

namespace {

constexpr uint8_t kMagic[4] = {'W', 'P', 'N', 'N'};
constexpr uint16_t kVersion = 1;

constexpr uint8_t kFlagRelu = 1u << 0;
constexpr uint8_t kFlagBias = 1u << 1;
constexpr uint8_t kFlagQuant = 1u << 2;

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

void save_model(const ModelGraph& graph, const std::filesystem::path& path) {
  graph.validate();
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kVersion);
  write_shape(w, graph.input_shape);
  w.u32(uint32_t(graph.layers.size()));
  for (const Layer& l : graph.layers) {
    w.u8(uint8_t(l.spec.kind));
    uint8_t flags = 0;
    if (l.spec.has_relu) flags |= kFlagRelu;
    if (l.bias) flags |= kFlagBias;
    if (l.qparams) flags |= kFlagQuant;
    w.u8(flags);
    w.u32(l.spec.in_ch);
    w.u32(l.spec.out_ch);
    w.u32(l.spec.kh);
    w.u32(l.spec.kw);
    w.u32(l.spec.stride);
    w.u32(l.spec.pad);
    write_shape(w, l.weights.shape);
    w.u64(l.weights.data.size());
    for (float v : l.weights.data) w.f32(v);
    if (l.bias) {
      w.u32(uint32_t(l.bias->size()));
      for (float v : *l.bias) w.f32(v);
    }
    if (l.qparams) {
      w.u8(l.qparams->bits);
      w.f32(l.qparams->scale);
    }
  }
  detail::write_file(path, w.buf);
}

ModelGraph load_model(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes);

  const auto magic = r.bytes(4);
  for (int i = 0; i < 4; ++i)
    if (magic[i] != kMagic[i]) fail(Errc::format_error, "bad magic, not a WPNN container");
  if (r.u16() != kVersion) fail(Errc::format_error, "unsupported WPNN version");

  ModelGraph graph;
  graph.input_shape = read_shape(r);
  const uint32_t count = r.u32();
  if (count == 0) fail(Errc::format_error, "model has zero layers");
  r.demand_elems(count, 24);  // record floor: kind, flags, six u32 fields
  graph.layers.resize(count);
  for (Layer& l : graph.layers) {
    const uint8_t kind = r.u8();
    if (kind > uint8_t(LayerKind::fully_connected))
      fail(Errc::format_error, "unknown layer kind tag " + std::to_string(kind));
    l.spec.kind = LayerKind(kind);
    const uint8_t flags = r.u8();
    l.spec.has_relu = flags & kFlagRelu;
    l.spec.in_ch = r.u32();
    l.spec.out_ch = r.u32();
    l.spec.kh = r.u32();
    l.spec.kw = r.u32();
    l.spec.stride = r.u32();
    l.spec.pad = r.u32();
    l.weights.shape = read_shape(r);
    const uint64_t n = r.u64();
    if (n != shape_size(l.weights.shape))
      fail(Errc::shape_mismatch, "tensor payload length does not match shape");
    r.demand_elems(n, 4);
    l.weights.data.resize(n);
    for (auto& v : l.weights.data) v = r.f32();
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
  if (r.remaining() != 0) fail(Errc::format_error, "trailing bytes after last layer");
  graph.validate();
  return graph;
}

void save_tensor_raw(const Tensor& t, const std::filesystem::path& path) {
  t.validate();
  detail::ByteWriter w;
  w.u32(uint32_t(t.shape.size()));
  for (uint32_t e : t.shape) w.u32(e);
  for (float v : t.data) w.f32(v);
  detail::write_file(path, w.buf);
}

Tensor load_tensor_raw(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes);
  const uint32_t ndim = r.u32();
  if (ndim == 0 || ndim > 4) fail(Errc::format_error, "tensor rank out of range");
  Tensor t;
  t.shape.resize(ndim);
  for (auto& e : t.shape) e = r.u32();
  r.demand_elems(shape_size(t.shape), 4);
  t.data.resize(shape_size(t.shape));
  for (auto& v : t.data) v = r.f32();
  if (r.remaining() != 0) fail(Errc::format_error, "trailing bytes after tensor payload");
  t.validate();
  return t;
}

}  // namespace wpool
