#pragma once

#include "cctn/graph.hpp"
#include "cctn/tensor.hpp"

#include <map>
#include <string>

namespace cctn {

// Named parameter tensors keyed "<layer>.weight" / "<layer>.bias".
using WeightStore = std::map<std::string, Tensorf>;

// Gaussian(0, 0.01) weights, zero biases, deterministic for a given seed.
WeightStore init_weights(const NetworkGraph& graph, std::uint64_t seed);

// Checks that every conv layer has exactly one weight and one bias entry of
// the declared shape; throws otherwise.
void validate_weights(const NetworkGraph& graph, const WeightStore& store);

// Copies entries whose names and shapes exist in both graphs (shared trunk
// when initializing the fine network from coarse weights). Returns the
// number of tensors copied.
int transfer_matching(const WeightStore& src, WeightStore& dst);

// Binary format: magic "CCTN", u32 version, u32 entry count, then per entry
// u32 name length + name, u32 rank, u32 extents, f32 little-endian row-major
// data. Entries ordered by name; round-trip is bit-exact.
void save_weights(const WeightStore& store, const std::string& path);
WeightStore load_weights(const std::string& path);

template <typename T>
std::map<std::string, Tensor<T>> cast_store(const WeightStore& store) {
  std::map<std::string, Tensor<T>> out;
  for (const auto& [name, tensor] : store) out.emplace(name, tensor.template cast<T>());
  return out;
}

}  // namespace cctn
