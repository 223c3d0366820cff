#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wpool/lut.hpp"
#include "wpool/model.hpp"

namespace wpool {

inline constexpr uint64_t kDefaultSeed = 1729;
// vectors below this norm are treated as zero for clustering purposes
inline constexpr double kNormEps = 1e-12;

struct PoolExclusions {
  bool first_layer = true;
  bool depthwise = true;
  bool fully_connected = true;
  std::vector<uint32_t> extra;  // explicit layer indices
};

struct PoolConfig {
  uint32_t group_size = 8;  // N, elements per weight vector
  uint32_t pool_size = 64;  // S, vectors in the pool
  uint64_t seed = kDefaultSeed;
  uint32_t max_iter = 100;
  PoolExclusions exclusions;

  void validate() const;
};

// Flat set of length-n vectors sliced out of a weight tensor.
struct GroupedVectors {
  uint32_t n = 0;
  uint32_t pad_tail = 0;  // zero-padded slots in each final channel run
  std::vector<float> values;

  size_t count() const { return n == 0 ? 0 : values.size() / n; }
  std::span<const float> vec(size_t i) const { return {values.data() + i * n, n}; }
  void append(const GroupedVectors& other);
};

struct PoolProvenance {
  uint64_t seed = 0;
  uint32_t iterations = 0;
  double inertia = 0.0;  // sum of member cosine distances at convergence
};

struct WeightPool {
  uint32_t n = 0;
  std::vector<float> values;  // size() * n reals
  PoolProvenance provenance;

  uint32_t size() const { return n == 0 ? 0 : uint32_t(values.size() / n); }
  std::span<const float> vec(uint32_t s) const { return {values.data() + size_t(s) * n, n}; }
};

struct AssignStats {
  double mean_cos_dist = 0.0;
  double max_cos_dist = 0.0;
};

// Slice a (out_ch, kh, kw, depth) weight tensor into contiguous channel runs
// of n, zero-padding the final run when depth % n != 0. Output order follows
// the tensor layout: out_ch, then kh, kw, then channel group.
GroupedVectors group_weights_z(const Tensor& weights, uint32_t n);

// Seeded k-means under cosine distance 1 - u.v/(|u||v|). Farthest-point
// initialization on normalized vectors (first pick from the seed), plain
// arithmetic-mean centroid updates so magnitudes survive, termination on
// fixed assignments or max_iter. Near-zero vectors are filtered out first.
WeightPool cluster_kmeans_cosine(const GroupedVectors& vectors, uint32_t pool_size,
                                 uint64_t seed, uint32_t max_iter);

// Nearest pool vector per input vector, ties to the lowest index. Near-zero
// vectors map to the minimum-norm pool vector and contribute zero distance.
std::pair<std::vector<uint32_t>, AssignStats> assign_indices(const GroupedVectors& vectors,
                                                             const WeightPool& pool);

struct CompressedLayer {
  LayerSpec spec;
  bool excluded = false;
  std::vector<uint32_t> indices;  // (out_ch, kh, kw, groups) row-major
  uint32_t pad_tail = 0;
  Tensor raw_weights;  // retained verbatim when excluded
  std::optional<std::vector<float>> bias;
  std::optional<QuantParams> qparams;

  uint32_t groups(uint32_t group_size) const;
};

struct CompressedModel {
  uint32_t group_size = 8;
  uint32_t pool_size = 64;
  uint64_t seed = kDefaultSeed;
  std::vector<uint32_t> input_shape;
  WeightPool pool;
  std::vector<CompressedLayer> layers;
  std::optional<LutTable> lut;  // embedded table, if generated

  // diagnostics from compression; not serialized
  std::vector<std::string> warnings;
  std::vector<AssignStats> layer_stats;

  bool calibrated() const;
  uint64_t total_params() const;
};

// Rebuild dense weights by substituting pool vectors and truncating the
// zero-padded tail; excluded layers return their retained weights.
Tensor reconstruct_layer(const CompressedLayer& layer, const WeightPool& pool,
                         uint32_t group_size);

// One global pool clustered from the union of grouped vectors of all
// non-excluded layers, then per-layer index assignment. When nothing is
// compressible the result has an empty pool and a warning instead of failing.
CompressedModel compress_model(const ModelGraph& model, const PoolConfig& cfg);

}  // namespace wpool
