#include "cctn/train.hpp"

#include "cctn/executor.hpp"
#include "cctn/supervision.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cctn {

TrainHyper paper_hyper() { return TrainHyper{1e-10, 0.99, 200000, 1, 1}; }

TrainHyper toy_hyper() { return TrainHyper{1e-3, 0.9, 2000, 1, 1}; }

TrainResult train(const NetworkGraph& graph, WeightStore& weights, const Sampler& sampler,
                  const TrainHyper& hyper) {
  validate_weights(graph, weights);
  if (hyper.iterations < 0 || hyper.batch_size < 1)
    throw std::invalid_argument("train: bad iteration or batch count");

  WeightStore velocity;
  for (const auto& [name, tensor] : weights) velocity.emplace(name, Tensorf(tensor.shape()));

  const GraphRunner<float> runner(graph, weights);
  Rng rng(hyper.seed);
  TrainResult result;
  result.loss_curve.reserve(static_cast<size_t>(hyper.iterations));

  for (int iter = 0; iter < hyper.iterations; ++iter) {
    WeightStore grad_sum;
    double loss_sum = 0.0;
    for (int b = 0; b < hyper.batch_size; ++b) {
      TrainExample ex = sampler(rng);
      if (ex.targets.size() != graph.heads.size()) {
        std::ostringstream os;
        os << "train: network has " << graph.heads.size() << " heads but example carries "
           << ex.targets.size() << " targets";
        throw std::invalid_argument(os.str());
      }

      const ForwardPass<float> pass = runner.forward(normalize_image(ex.image), /*retain=*/true);
      std::map<std::string, Tensorf> seeds;
      for (size_t h = 0; h < graph.heads.size(); ++h) {
        const HeadSpec& head = graph.heads[h];
        const Tensorf& logits = pass.acts.at(head.logits_layer);
        LossResult<float> lr = head.kind == HeadKind::Softmax2
                                   ? softmax_xent_loss(logits, ex.targets[h])
                                   : bce_loss(logits, ex.targets[h]);
        loss_sum += lr.loss;
        seeds.emplace(head.logits_layer, std::move(lr.grad));
      }

      BackwardPass<float> back = runner.backward(pass, seeds);
      for (auto& [name, grad] : back.param_grads) {
        auto it = grad_sum.find(name);
        if (it == grad_sum.end())
          grad_sum.emplace(name, std::move(grad));
        else
          it->second.array() += grad.array();
      }
    }

    const float inv_batch = 1.0f / static_cast<float>(hyper.batch_size);
    for (auto& [name, param] : weights) {
      const auto it = grad_sum.find(name);
      if (it == grad_sum.end()) continue;
      it->second.array() *= inv_batch;
      sgd_momentum_step(param, it->second, velocity.at(name), hyper.lr, hyper.momentum);
    }
    result.loss_curve.push_back(loss_sum / hyper.batch_size);
  }
  return result;
}

void save_loss_curve(const std::vector<double>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("loss curve: cannot write " + path);
  char buf[64];
  for (size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.9g\n", i, curve[i]);
    out << buf;
  }
}

}  // namespace cctn
