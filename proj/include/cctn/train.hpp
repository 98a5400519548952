#pragma once

#include "cctn/graph.hpp"
#include "cctn/rng.hpp"
#include "cctn/types.hpp"
#include "cctn/weights.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cctn {

// One training example: image in [0,1] plus one target map per network head
// (coarse: region mask; fine: text-line mask then central-line mask).
struct TrainExample {
  Tensorf image;
  std::vector<MapF> targets;
};

using Sampler = std::function<TrainExample(Rng&)>;

struct TrainHyper {
  double lr = 1e-3;
  double momentum = 0.9;
  int iterations = 1000;
  int batch_size = 1;
  std::uint64_t seed = 1;
};

// Paper-style preset: learning rate and momentum as published, which assume
// summed (not mean) losses over roughly 250k pixels. Losses here are pixel
// means, so this preset is only useful as a faithful reference point.
TrainHyper paper_hyper();

// Desk-scale preset tuned for mean-normalized losses.
TrainHyper toy_hyper();

struct TrainResult {
  std::vector<double> loss_curve;  // one entry per iteration
};

// SGD with momentum over the sampler stream; deterministic for a fixed
// (seed, sampler). Weights are updated in place.
TrainResult train(const NetworkGraph& graph, WeightStore& weights, const Sampler& sampler,
                  const TrainHyper& hyper);

void save_loss_curve(const std::vector<double>& curve, const std::string& path);

}  // namespace cctn
