#include "wpool/pool.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "wpool/error.hpp"

namespace wpool {

void PoolConfig::validate() const {
  if (group_size < 2) fail(Errc::invalid_config, "group size must be >= 2");
  if (group_size > 16) fail(Errc::invalid_config, "group size above 16 is not supported");
  if (pool_size < 2) fail(Errc::invalid_config, "pool size must be >= 2");
  if (pool_size > 65535) fail(Errc::invalid_config, "pool size above 65535 is not supported");
}

void GroupedVectors::append(const GroupedVectors& other) {
  values.insert(values.end(), other.values.begin(), other.values.end());
}

uint32_t CompressedLayer::groups(uint32_t group_size) const {
  return (spec.filter_depth() + group_size - 1) / group_size;
}

bool CompressedModel::calibrated() const {
  for (const auto& l : layers)
    if (!l.qparams) return false;
  return !layers.empty();
}

uint64_t CompressedModel::total_params() const {
  uint64_t w = 0;
  for (const auto& l : layers)
    w += uint64_t(l.spec.out_ch) * l.spec.kh * l.spec.kw * l.spec.filter_depth();
  return w;
}

GroupedVectors group_weights_z(const Tensor& weights, uint32_t n) {
  if (n < 2) fail(Errc::invalid_config, "group size must be >= 2");
  weights.validate();
  if (weights.shape.size() != 4)
    fail(Errc::shape_mismatch, "weights must be (out_ch, kh, kw, depth)");
  const uint32_t depth = weights.shape[3];
  const size_t positions = size_t(weights.shape[0]) * weights.shape[1] * weights.shape[2];
  const uint32_t groups = (depth + n - 1) / n;

  GroupedVectors out;
  out.n = n;
  out.pad_tail = (n - depth % n) % n;
  out.values.assign(positions * groups * n, 0.0f);
  for (size_t p = 0; p < positions; ++p) {
    const float* src = weights.data.data() + p * depth;
    float* dst = out.values.data() + p * size_t(groups) * n;
    for (uint32_t c = 0; c < depth; ++c) dst[(c / n) * n + c % n] = src[c];
  }
  return out;
}

namespace {

double norm_of(std::span<const float> v) {
  double s = 0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

double cos_dist(std::span<const float> u, double nu, std::span<const float> v, double nv) {
  double dot = 0;
  for (size_t i = 0; i < u.size(); ++i) dot += double(u[i]) * v[i];
  return 1.0 - dot / (nu * nv);
}

// farthest-point pick sequence over normalized vectors, first pick seeded
std::vector<size_t> farthest_point_init(const std::vector<float>& normed, uint32_t n,
                                        size_t count, uint32_t k, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<size_t> picks;
  picks.reserve(k);
  picks.push_back(size_t(rng() % count));

  auto vec = [&](size_t i) { return std::span<const float>(normed.data() + i * n, n); };
  std::vector<double> mind(count);
  for (size_t i = 0; i < count; ++i) mind[i] = cos_dist(vec(i), 1.0, vec(picks[0]), 1.0);

  while (picks.size() < k) {
    size_t best = 0;
    for (size_t i = 1; i < count; ++i)
      if (mind[i] > mind[best]) best = i;
    if (mind[best] <= 1e-9)
      fail(Errc::insufficient_data, "fewer distinct vector directions than pool size");
    picks.push_back(best);
    for (size_t i = 0; i < count; ++i)
      mind[i] = std::min(mind[i], cos_dist(vec(i), 1.0, vec(best), 1.0));
  }
  return picks;
}

}  // namespace

WeightPool cluster_kmeans_cosine(const GroupedVectors& vectors, uint32_t pool_size,
                                 uint64_t seed, uint32_t max_iter) {
  if (pool_size < 2) fail(Errc::invalid_config, "pool size must be >= 2");
  const uint32_t n = vectors.n;

  // keep only vectors with usable norms
  std::vector<float> usable;
  std::vector<double> norms;
  for (size_t i = 0; i < vectors.count(); ++i) {
    auto v = vectors.vec(i);
    const double nv = norm_of(v);
    if (nv < kNormEps) continue;
    usable.insert(usable.end(), v.begin(), v.end());
    norms.push_back(nv);
  }
  const size_t count = norms.size();
  if (count == 0) fail(Errc::insufficient_data, "all vectors are near zero");
  if (count < pool_size)
    fail(Errc::insufficient_data, "fewer usable vectors than pool size");

  std::set<std::vector<float>> distinct;
  for (size_t i = 0; i < count; ++i) {
    distinct.emplace(usable.begin() + i * n, usable.begin() + (i + 1) * n);
    if (distinct.size() >= pool_size) break;
  }
  if (distinct.size() < pool_size)
    fail(Errc::insufficient_data, "fewer distinct vectors than pool size");

  std::vector<float> normed(usable.size());
  for (size_t i = 0; i < count; ++i)
    for (uint32_t j = 0; j < n; ++j)
      normed[i * n + j] = float(usable[i * n + j] / norms[i]);

  const auto picks = farthest_point_init(normed, n, count, pool_size, seed);

  std::vector<float> centroids(size_t(pool_size) * n);
  for (uint32_t c = 0; c < pool_size; ++c)
    std::copy_n(usable.begin() + picks[c] * n, n, centroids.begin() + size_t(c) * n);

  auto centroid = [&](uint32_t c) {
    return std::span<const float>(centroids.data() + size_t(c) * n, n);
  };
  std::vector<double> cnorms(pool_size);
  auto refresh_cnorms = [&] {
    for (uint32_t c = 0; c < pool_size; ++c) cnorms[c] = norm_of(centroid(c));
  };
  refresh_cnorms();

  std::vector<uint32_t> assign(count, 0);
  std::vector<uint32_t> prev(count, uint32_t(-1));
  uint32_t iterations = 0;
  for (uint32_t iter = 0; iter < max_iter; ++iter) {
    for (size_t i = 0; i < count; ++i) {
      std::span<const float> v(usable.data() + i * n, n);
      uint32_t best = 0;
      double bestd = cos_dist(v, norms[i], centroid(0), cnorms[0]);
      for (uint32_t c = 1; c < pool_size; ++c) {
        const double d = cos_dist(v, norms[i], centroid(c), cnorms[c]);
        if (d < bestd) {
          bestd = d;
          best = c;
        }
      }
      assign[i] = best;
    }
    if (assign == prev) break;
    prev = assign;
    ++iterations;

    std::vector<double> sums(size_t(pool_size) * n, 0.0);
    std::vector<uint32_t> members(pool_size, 0);
    for (size_t i = 0; i < count; ++i) {
      for (uint32_t j = 0; j < n; ++j) sums[size_t(assign[i]) * n + j] += usable[i * n + j];
      ++members[assign[i]];
    }
    for (uint32_t c = 0; c < pool_size; ++c) {
      if (members[c] == 0) continue;  // empty cluster keeps its centroid
      double nn = 0;
      for (uint32_t j = 0; j < n; ++j) {
        const double m = sums[size_t(c) * n + j] / members[c];
        nn += m * m;
      }
      if (std::sqrt(nn) < kNormEps) continue;  // degenerate mean, keep centroid
      for (uint32_t j = 0; j < n; ++j)
        centroids[size_t(c) * n + j] = float(sums[size_t(c) * n + j] / members[c]);
    }
    refresh_cnorms();
  }

  double inertia = 0;
  for (size_t i = 0; i < count; ++i) {
    std::span<const float> v(usable.data() + i * n, n);
    inertia += cos_dist(v, norms[i], centroid(assign[i]), cnorms[assign[i]]);
  }

  for (uint32_t a = 0; a < pool_size; ++a)
    for (uint32_t b = a + 1; b < pool_size; ++b)
      if (std::equal(centroid(a).begin(), centroid(a).end(), centroid(b).begin()))
        fail(Errc::insufficient_data, "clustering collapsed two pool vectors");

  WeightPool pool;
  pool.n = n;
  pool.values = std::move(centroids);
  pool.provenance = {seed, iterations, inertia};
  return pool;
}

std::pair<std::vector<uint32_t>, AssignStats> assign_indices(const GroupedVectors& vectors,
                                                             const WeightPool& pool) {
  if (pool.size() == 0) fail(Errc::insufficient_data, "empty weight pool");
  if (vectors.n != pool.n) fail(Errc::shape_mismatch, "vector length != pool vector length");

  std::vector<double> cnorms(pool.size());
  for (uint32_t c = 0; c < pool.size(); ++c) cnorms[c] = norm_of(pool.vec(c));

  uint32_t min_norm_idx = 0;
  for (uint32_t c = 1; c < pool.size(); ++c)
    if (cnorms[c] < cnorms[min_norm_idx]) min_norm_idx = c;

  std::vector<uint32_t> indices(vectors.count());
  AssignStats stats;
  double sum = 0;
  for (size_t i = 0; i < vectors.count(); ++i) {
    auto v = vectors.vec(i);
    const double nv = norm_of(v);
    if (nv < kNormEps) {
      indices[i] = min_norm_idx;
      continue;  // contributes zero distance
    }
    uint32_t best = 0;
    double bestd = cos_dist(v, nv, pool.vec(0), cnorms[0]);
    for (uint32_t c = 1; c < pool.size(); ++c) {
      const double d = cos_dist(v, nv, pool.vec(c), cnorms[c]);
      if (d < bestd) {  // strict: ties keep the lowest index
        bestd = d;
        best = c;
      }
    }
    indices[i] = best;
    sum += bestd;
    stats.max_cos_dist = std::max(stats.max_cos_dist, bestd);
  }
  stats.mean_cos_dist = vectors.count() ? sum / double(vectors.count()) : 0.0;
  return {std::move(indices), stats};
}

Tensor reconstruct_layer(const CompressedLayer& layer, const WeightPool& pool,
                         uint32_t group_size) {
  if (layer.excluded) return layer.raw_weights;
  const uint32_t depth = layer.spec.filter_depth();
  const uint32_t groups = layer.groups(group_size);
  const size_t positions = size_t(layer.spec.out_ch) * layer.spec.kh * layer.spec.kw;
  if (layer.indices.size() != positions * groups)
    fail(Errc::shape_mismatch, "index array size mismatch");

  Tensor out = Tensor::zeros(layer.spec.weight_shape());
  for (size_t p = 0; p < positions; ++p) {
    float* dst = out.data.data() + p * depth;
    for (uint32_t g = 0; g < groups; ++g) {
      const uint32_t idx = layer.indices[p * groups + g];
      if (idx >= pool.size()) fail(Errc::out_of_range, "pool index out of range");
      auto v = pool.vec(idx);
      const uint32_t lanes = std::min(group_size, depth - g * group_size);
      for (uint32_t j = 0; j < lanes; ++j) dst[g * group_size + j] = v[j];
    }
  }
  return out;
}

CompressedModel compress_model(const ModelGraph& model, const PoolConfig& cfg) {
  cfg.validate();
  model.validate();

  CompressedModel out;
  out.group_size = cfg.group_size;
  out.pool_size = cfg.pool_size;
  out.seed = cfg.seed;
  out.input_shape = model.input_shape;
  out.layers.resize(model.layers.size());
  out.layer_stats.resize(model.layers.size());

  auto is_excluded = [&](size_t i, const LayerSpec& spec) {
    if (cfg.exclusions.first_layer && i == 0) return true;
    if (cfg.exclusions.depthwise && spec.kind == LayerKind::depthwise) return true;
    if (cfg.exclusions.fully_connected && spec.kind == LayerKind::fully_connected) return true;
    for (uint32_t e : cfg.exclusions.extra)
      if (e == i) return true;
    return false;
  };

  GroupedVectors all;
  all.n = cfg.group_size;
  std::vector<size_t> compressible;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    CompressedLayer& c = out.layers[i];
    c.spec = l.spec;
    c.bias = l.bias;
    c.qparams = l.qparams;
    if (is_excluded(i, l.spec)) {
      c.excluded = true;
      c.raw_weights = l.weights;
      continue;
    }
    compressible.push_back(i);
    all.append(group_weights_z(l.weights, cfg.group_size));
  }

  if (compressible.empty()) {
    out.pool.n = cfg.group_size;
    out.warnings.push_back("no compressible layer; every layer kept uncompressed");
    return out;
  }

  out.pool = cluster_kmeans_cosine(all, cfg.pool_size, cfg.seed, cfg.max_iter);

  for (size_t i : compressible) {
    CompressedLayer& c = out.layers[i];
    auto grouped = group_weights_z(model.layers[i].weights, cfg.group_size);
    c.pad_tail = grouped.pad_tail;
    auto [indices, stats] = assign_indices(grouped, out.pool);
    c.indices = std::move(indices);
    out.layer_stats[i] = stats;
  }
  return out;
}

}  // namespace wpool
