#pragma once

#include "cctn/graph.hpp"
#include "cctn/ops.hpp"
#include "cctn/tensor.hpp"

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cctn {

template <typename T>
struct ForwardPass {
  std::map<std::string, Tensor<T>> acts;
  std::map<std::string, std::vector<Eigen::Index>> pool_argmax;
};

template <typename T>
struct BackwardPass {
  std::map<std::string, Tensor<T>> param_grads;  // "<layer>.weight" / ".bias"
  Tensor<T> input_grad;
};

// Runs a NetworkGraph on one image. `probe_linear` replaces ReLU with the
// identity and max-pooling with average pooling so that gradient probes see
// the full architectural receptive field instead of a data-dependent subset.
template <typename T>
class GraphRunner {
 public:
  GraphRunner(const NetworkGraph& graph, const std::map<std::string, Tensor<T>>& params,
              bool probe_linear = false)
      : graph_(graph), params_(params), probe_linear_(probe_linear) {}

  // When `retain` is false only head logits are kept and intermediate
  // activations are dropped as soon as every consumer has run.
  ForwardPass<T> forward(const Tensor<T>& image, bool retain) const {
    if (image.rank() != 3 || image.extent(0) != 3)
      throw std::invalid_argument("forward: image must be 3xHxW");
    if (image.extent(1) < kMinInputExtent || image.extent(2) < kMinInputExtent) {
      std::ostringstream os;
      os << "forward: input " << image.extent(1) << 'x' << image.extent(2)
         << " below minimum " << kMinInputExtent << 'x' << kMinInputExtent
         << " required by the five pooling stages";
      throw std::invalid_argument(os.str());
    }

    std::map<std::string, int> remaining_uses;
    if (!retain) {
      for (const Layer& l : graph_.layers) {
        for (const std::string& in : l.inputs) ++remaining_uses[in];
        if (l.kind == LayerKind::CropCenterLike) ++remaining_uses[l.ref];
      }
      for (const HeadSpec& h : graph_.heads) ++remaining_uses[h.logits_layer];
    }

    ForwardPass<T> pass;
    const Eigen::Index in_h = image.extent(1), in_w = image.extent(2);
    for (const Layer& l : graph_.layers) {
      Tensor<T> out;
      switch (l.kind) {
        case LayerKind::Input:
          out = image;
          break;
        case LayerKind::Conv:
          out = conv2d_forward(act(pass, l.inputs[0]), param(l.name + ".weight"),
                               param(l.name + ".bias"), l.spec);
          break;
        case LayerKind::Relu:
          out = probe_linear_ ? act(pass, l.inputs[0]) : relu(act(pass, l.inputs[0]));
          break;
        case LayerKind::MaxPool2:
          if (probe_linear_) {
            out = avgpool2(act(pass, l.inputs[0]));
          } else {
            auto r = maxpool2(act(pass, l.inputs[0]));
            out = std::move(r.output);
            pass.pool_argmax[l.name] = std::move(r.argmax);
          }
          break;
        case LayerKind::EltwiseSum: {
          std::vector<const Tensor<T>*> ins;
          for (const std::string& in : l.inputs) ins.push_back(&act(pass, in));
          out = eltwise_sum(ins);
          break;
        }
        case LayerKind::Upsample2x:
          out = upsample2x_bilinear(act(pass, l.inputs[0]));
          break;
        case LayerKind::CropCenterLike: {
          const Tensor<T>& ref = act(pass, l.ref);
          out = crop_center(act(pass, l.inputs[0]), ref.extent(1), ref.extent(2));
          break;
        }
        case LayerKind::ResizeToInput:
          out = resize_bilinear(act(pass, l.inputs[0]), in_h, in_w);
          break;
      }
      pass.acts[l.name] = std::move(out);
      if (!retain) {
        auto release = [&](const std::string& name) {
          auto it = remaining_uses.find(name);
          if (it != remaining_uses.end() && --it->second == 0) pass.acts.erase(name);
        };
        for (const std::string& in : l.inputs) release(in);
        if (l.kind == LayerKind::CropCenterLike) release(l.ref);
      }
    }
    return pass;
  }

  // Probability heat-maps, one per head, at input resolution.
  std::vector<Map2<T>> heatmaps(const ForwardPass<T>& pass) const {
    std::vector<Map2<T>> maps;
    for (const HeadSpec& h : graph_.heads) {
      const Tensor<T>& logits = act(pass, h.logits_layer);
      maps.push_back(h.kind == HeadKind::Softmax2 ? softmax2_map(logits) : sigmoid_map(logits));
    }
    return maps;
  }

  // Backpropagates from per-layer output-gradient seeds (typically the head
  // logit layers) to parameters and the input. Requires a retained forward.
  BackwardPass<T> backward(const ForwardPass<T>& pass,
                           const std::map<std::string, Tensor<T>>& seeds) const {
    std::map<std::string, Tensor<T>> grads;
    for (const auto& [name, g] : seeds) {
      if (graph_.index_of(name) < 0)
        throw std::invalid_argument("backward: seed for unknown layer " + name);
      grads[name] = g;
    }
    BackwardPass<T> result;
    for (auto it = graph_.layers.rbegin(); it != graph_.layers.rend(); ++it) {
      const Layer& l = *it;
      const auto git = grads.find(l.name);
      if (git == grads.end()) continue;
      const Tensor<T> upstream = std::move(git->second);
      grads.erase(git);
      switch (l.kind) {
        case LayerKind::Input:
          result.input_grad = accumulate(result.input_grad, upstream);
          break;
        case LayerKind::Conv: {
          auto r = conv2d_backward(act(pass, l.inputs[0]), param(l.name + ".weight"), l.spec,
                                   upstream);
          add_grad(grads, l.inputs[0], std::move(r.input_grad));
          result.param_grads[l.name + ".weight"] =
              accumulate(result.param_grads[l.name + ".weight"], r.weight_grad);
          result.param_grads[l.name + ".bias"] =
              accumulate(result.param_grads[l.name + ".bias"], r.bias_grad);
          break;
        }
        case LayerKind::Relu:
          add_grad(grads, l.inputs[0],
                   probe_linear_ ? upstream : relu_backward(act(pass, l.inputs[0]), upstream));
          break;
        case LayerKind::MaxPool2: {
          const auto& in_shape = act(pass, l.inputs[0]).shape();
          add_grad(grads, l.inputs[0],
                   probe_linear_ ? avgpool2_backward(in_shape, upstream)
                                 : maxpool2_backward(pass.pool_argmax.at(l.name), in_shape,
                                                     upstream));
          break;
        }
        case LayerKind::EltwiseSum:
          for (const std::string& in : l.inputs) add_grad(grads, in, upstream);
          break;
        case LayerKind::Upsample2x:
          add_grad(grads, l.inputs[0],
                   resize_bilinear_backward(act(pass, l.inputs[0]).shape(), upstream));
          break;
        case LayerKind::CropCenterLike:
          add_grad(grads, l.inputs[0],
                   crop_center_backward(act(pass, l.inputs[0]).shape(), upstream));
          break;
        case LayerKind::ResizeToInput:
          add_grad(grads, l.inputs[0],
                   resize_bilinear_backward(act(pass, l.inputs[0]).shape(), upstream));
          break;
      }
    }
    return result;
  }

 private:
  const Tensor<T>& act(const ForwardPass<T>& pass, const std::string& name) const {
    const auto it = pass.acts.find(name);
    if (it == pass.acts.end())
      throw std::logic_error("executor: activation for " + name + " not retained");
    return it->second;
  }

  const Tensor<T>& param(const std::string& key) const {
    const auto it = params_.find(key);
    if (it == params_.end()) throw std::runtime_error("executor: missing parameter " + key);
    return it->second;
  }

  static Tensor<T> accumulate(Tensor<T> current, const Tensor<T>& add) {
    if (current.size() == 0) return add;
    current.array() += add.array();
    return current;
  }

  static void add_grad(std::map<std::string, Tensor<T>>& grads, const std::string& name,
                       Tensor<T> g) {
    auto it = grads.find(name);
    if (it == grads.end())
      grads.emplace(name, std::move(g));
    else
      it->second.array() += g.array();
  }

  const NetworkGraph& graph_;
  const std::map<std::string, Tensor<T>>& params_;
  bool probe_linear_ = false;
};

}  // namespace cctn
