#pragma once

#include "cctn/conv.hpp"

#include <map>
#include <string>
#include <vector>

namespace cctn {

enum class LayerKind {
  Input,
  Conv,
  Relu,
  MaxPool2,
  EltwiseSum,
  Upsample2x,
  CropCenterLike,  // crop spatial extents to match a reference layer
  ResizeToInput,   // bilinear resize to the network input resolution
};

enum class HeadMode { Coarse, Fine };
enum class HeadKind { Softmax2, Sigmoid };

struct Layer {
  std::string name;
  LayerKind kind = LayerKind::Input;
  std::vector<std::string> inputs;
  ConvSpec spec;    // Conv only
  std::string ref;  // CropCenterLike only
};

struct HeadSpec {
  std::string name;          // e.g. "tr", "tl", "cl"
  std::string logits_layer;  // layer emitting logits at input resolution
  HeadKind kind = HeadKind::Softmax2;
};

// Declarative layer DAG. Layers are stored in topological order; every edge
// refers to an earlier layer by name.
struct NetworkGraph {
  HeadMode mode = HeadMode::Coarse;
  double width_multiplier = 1.0;
  std::vector<Layer> layers;
  std::vector<HeadSpec> heads;

  int index_of(const std::string& name) const;
  const Layer& layer(const std::string& name) const;
  bool has_layer(const std::string& name) const { return index_of(name) >= 0; }
};

struct LayerShape {
  Eigen::Index c = 0, h = 0, w = 0;
  bool operator==(const LayerShape&) const = default;
};

// Minimum input extent accepted by the five-pool stack.
constexpr Eigen::Index kMinInputExtent = 32;

// Builds the coarse or fine text network: VggNet-style blocks 1-4, the
// parallel 3x3 / 3x7 / 7x3 rectangle block summed element-wise, a 2x2 max
// pool into the new pool-5, two 1x1 convolutions (ReLU after the first only),
// a 2x bilinear upsample fused with the center-cropped pool-4 path, 1x1 head
// convolutions, and a bilinear resize of the logits to input resolution.
NetworkGraph build_cctn_graph(HeadMode mode, double width_multiplier);

// Walks the graph symbolically, validating every edge against the ConvSpec
// output formula. Throws with a diagnostic on any inconsistency (including
// inputs too small for the pooling stack).
std::map<std::string, LayerShape> compute_shapes(const NetworkGraph& graph,
                                                 Eigen::Index in_h, Eigen::Index in_w);

// Text key=value graph configuration (mode, width multiplier, seed).
struct GraphConfig {
  HeadMode mode = HeadMode::Coarse;
  double width_multiplier = 1.0;
  std::uint64_t seed = 1;
  // Auditable architecture choice: where ReLU sits between the two 1x1
  // convolutions ("first_only" is the shipped behaviour).
  std::string relu_between_1x1 = "first_only";
};

GraphConfig load_graph_config(const std::string& path);
void save_graph_config(const GraphConfig& config, const std::string& path);

}  // namespace cctn
