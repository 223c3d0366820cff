#include "wpool/reference.hpp"

#include <cmath>
#include <string>

#include "wpool/error.hpp"

namespace wpool {

QWeights quantize_weights_pow2(std::span<const float> w, std::vector<uint32_t> shape,
                               uint8_t bits) {
  if (bits < 2 || bits > 16) fail(Errc::invalid_config, "weight bitwidth out of range 2..16");
  if (shape_size(shape) != w.size())
    fail(Errc::shape_mismatch, "weight shape does not match value count");
  const int64_t limit = (int64_t(1) << (bits - 1)) - 1;

  float maxabs = 0.0f;
  for (float v : w) maxabs = std::max(maxabs, std::fabs(v));

  QWeights q;
  q.shape = std::move(shape);
  q.bits = bits;
  q.values.resize(w.size(), 0);
  if (maxabs == 0.0f) return q;

  int e = int(std::ceil(std::log2(double(maxabs) / double(limit))));
  while (std::llround(double(maxabs) / std::ldexp(1.0, e)) > limit) ++e;
  while (std::llround(double(maxabs) / std::ldexp(1.0, e - 1)) <= limit) --e;
  q.scale_exp = e;

  const double inv = 1.0 / std::ldexp(1.0, e);
  for (size_t i = 0; i < w.size(); ++i)
    q.values[i] = int32_t(std::llround(double(w[i]) * inv));
  return q;
}

namespace {

// Shared loop nest for both arithmetic domains. Padding reads as zero.
template <typename In, typename Wt, typename Acc, typename Out>
void conv_nest(std::span<const uint32_t> ishape, const In* input, const LayerSpec& spec,
               const Wt* weights, const Acc* bias, Out* out) {
  const uint32_t h = ishape[0], w = ishape[1];
  const auto oshape = layer_output_shape(ishape, spec);
  const uint32_t oh = oshape[0], ow = oshape[1];
  const uint32_t depth = spec.filter_depth();
  const size_t ksize = size_t(spec.kh) * spec.kw * depth;

  if (spec.kind == LayerKind::fully_connected) {
    for (uint32_t f = 0; f < spec.out_ch; ++f) {
      Acc acc = bias ? bias[f] : Acc(0);
      const Wt* wf = weights + size_t(f) * ksize;
      for (uint32_t i = 0; i < spec.in_ch; ++i) acc += Acc(input[i]) * Acc(wf[i]);
      out[f] = Out(acc);
    }
    return;
  }

  const uint32_t in_ch = ishape[2];
  for (uint32_t oy = 0; oy < oh; ++oy) {
    for (uint32_t ox = 0; ox < ow; ++ox) {
      for (uint32_t f = 0; f < spec.out_ch; ++f) {
        Acc acc = bias ? bias[f] : Acc(0);
        const Wt* wf = weights + size_t(f) * ksize;
        for (uint32_t ky = 0; ky < spec.kh; ++ky) {
          const int64_t iy = int64_t(oy) * spec.stride + ky - spec.pad;
          for (uint32_t kx = 0; kx < spec.kw; ++kx) {
            const int64_t ix = int64_t(ox) * spec.stride + kx - spec.pad;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            const In* px = input + (size_t(iy) * w + size_t(ix)) * in_ch;
            const Wt* wk = wf + (size_t(ky) * spec.kw + kx) * depth;
            if (spec.kind == LayerKind::depthwise) {
              acc += Acc(px[f]) * Acc(wk[0]);
            } else {
              for (uint32_t c = 0; c < in_ch; ++c) acc += Acc(px[c]) * Acc(wk[c]);
            }
          }
        }
        out[(size_t(oy) * ow + ox) * spec.out_ch + f] = Out(acc);
      }
    }
  }
}

void check_input_shape(std::span<const uint32_t> ishape, const LayerSpec& spec) {
  spec.validate();
  if (ishape.size() != 3) fail(Errc::shape_mismatch, "activation tensors are (h, w, ch)");
  layer_output_shape(ishape, spec);  // throws on mismatch
}

}  // namespace

Tensor reference_conv_f32(const Tensor& input, const LayerSpec& spec, const Tensor& weights,
                          std::span<const float> bias) {
  check_input_shape(input.shape, spec);
  if (!same_shape(weights.shape, spec.weight_shape()))
    fail(Errc::shape_mismatch, "weight tensor shape mismatch");
  if (!bias.empty() && bias.size() != spec.out_ch)
    fail(Errc::shape_mismatch, "bias length != out_ch");
  Tensor out = Tensor::zeros(layer_output_shape(input.shape, spec));
  conv_nest<float, float, float, float>(input.shape, input.data.data(), spec,
                                        weights.data.data(), bias.empty() ? nullptr : bias.data(),
                                        out.data.data());
  return out;
}

AccTensor reference_conv_int(const QTensor& input, const LayerSpec& spec, const QWeights& weights,
                             std::span<const int64_t> bias) {
  check_input_shape(input.shape, spec);
  if (input.bits < 1 || input.bits > 8) fail(Errc::invalid_config, "activation bitwidth out of range 1..8");
  const uint32_t qmax = (1u << input.bits) - 1u;
  for (uint8_t v : input.data)
    if (v > qmax) fail(Errc::out_of_range, "activation value exceeds 2^bits - 1");
  if (!same_shape(weights.shape, spec.weight_shape()))
    fail(Errc::shape_mismatch, "weight tensor shape mismatch");
  if (!bias.empty() && bias.size() != spec.out_ch)
    fail(Errc::shape_mismatch, "bias length != out_ch");
  AccTensor out;
  out.shape = layer_output_shape(input.shape, spec);
  out.data.assign(shape_size(out.shape), 0);
  conv_nest<uint8_t, int32_t, int64_t, int64_t>(input.shape, input.data.data(), spec,
                                                weights.values.data(),
                                                bias.empty() ? nullptr : bias.data(),
                                                out.data.data());
  return out;
}

}  // namespace wpool
