#pragma once

// Network inventories sized like the published parameter counts the reports
// are checked against, with seeded random weights.

#include <random>

#include "test_util.hpp"
#include "wpool/model.hpp"

namespace wpool::test {

// conv-only inventory, 2,729,664 parameters
inline std::vector<LayerSpec> resnet14_specs() {
  std::vector<LayerSpec> specs;
  specs.push_back(conv_spec(3, 64, 3, 1, 1, true));
  for (int i = 0; i < 4; ++i) specs.push_back(conv_spec(64, 64, 3, 1, 1, true));
  specs.push_back(conv_spec(64, 128, 3, 2, 1, true));
  for (int i = 0; i < 3; ++i) specs.push_back(conv_spec(128, 128, 3, 1, 1, true));
  specs.push_back(conv_spec(128, 256, 3, 2, 1, true));
  for (int i = 0; i < 3; ++i) specs.push_back(conv_spec(256, 256, 3, 1, 1, true));
  return specs;
}

// first two stages of the same inventory, 665,280 parameters
inline std::vector<LayerSpec> resnet10_specs() {
  auto specs = resnet14_specs();
  specs.resize(9);
  return specs;
}

inline ModelGraph graph_from_specs(const std::vector<LayerSpec>& specs, uint64_t seed,
                                   std::vector<uint32_t> input_shape = {32, 32, 3}) {
  std::mt19937_64 rng(seed);
  ModelGraph g;
  g.input_shape = std::move(input_shape);
  for (const auto& spec : specs) {
    Layer l;
    l.spec = spec;
    l.weights = random_tensor(spec.weight_shape(), rng, -0.5f, 0.5f);
    g.layers.push_back(std::move(l));
  }
  return g;
}

}  // namespace wpool::test
