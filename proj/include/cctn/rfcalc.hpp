#pragma once

#include "cctn/graph.hpp"
#include "cctn/weights.hpp"

#include <map>
#include <string>

namespace cctn {

// Receptive-field state of one layer: field extent in input pixels, input
// pixels per cell, and the sub-pixel center of the first cell.
struct RfState {
  double rf_h = 1.0, rf_w = 1.0;
  double jump_h = 1.0, jump_w = 1.0;
  double offset_h = 0.0, offset_w = 0.0;
};

// Standard recurrence: conv/pool grow rf by (k-1)*jump and multiply jump by
// the stride; element-wise fusions take the per-dimension maximum over
// inputs; upsampling halves jump and leaves rf unchanged. Crop offsets
// depend on concrete extents, hence the input size argument.
std::map<std::string, RfState> analytic_rf(const NetworkGraph& graph, Eigen::Index in_h,
                                           Eigen::Index in_w);

RfState analytic_rf(const NetworkGraph& graph, const std::string& layer_name, Eigen::Index in_h,
                    Eigen::Index in_w);

struct Footprint {
  Eigen::Index x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive input-pixel bbox
  Eigen::Index w() const { return x1 - x0 + 1; }
  Eigen::Index h() const { return y1 - y0 + 1; }
  bool empty() const { return x1 < x0 || y1 < y0; }
};

// Measured footprint: unit gradient at one cell of the named layer,
// backpropagated to the input with ReLU disabled, max-pooling replaced by
// average pooling and all weights forced positive, so no architectural path
// is masked. Returns the bbox of input cells with |gradient| > 1e-12.
Footprint empirical_rf(const NetworkGraph& graph, const WeightStore& weights,
                       const std::string& layer_name, Eigen::Index cell_y, Eigen::Index cell_x,
                       Eigen::Index in_h, Eigen::Index in_w);

// UTF-8 table "layer rf_h rf_w jump" per layer, followed by the new pool-5
// summary and the reference design figure it does not reproduce.
std::string rf_table(const NetworkGraph& graph, Eigen::Index in_h, Eigen::Index in_w);

}  // namespace cctn
