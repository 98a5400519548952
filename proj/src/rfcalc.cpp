#include "cctn/rfcalc.hpp"

#include "cctn/executor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cctn {

std::map<std::string, RfState> analytic_rf(const NetworkGraph& graph, Eigen::Index in_h,
                                           Eigen::Index in_w) {
  const auto shapes = compute_shapes(graph, in_h, in_w);
  std::map<std::string, RfState> states;
  auto state_of = [&](const std::string& name) -> const RfState& { return states.at(name); };

  for (const Layer& l : graph.layers) {
    RfState s;
    switch (l.kind) {
      case LayerKind::Input:
        s = RfState{1, 1, 1, 1, 0, 0};
        break;
      case LayerKind::Conv: {
        const RfState& in = state_of(l.inputs[0]);
        s.rf_h = in.rf_h + (l.spec.kernel_h - 1) * in.jump_h;
        s.rf_w = in.rf_w + (l.spec.kernel_w - 1) * in.jump_w;
        s.jump_h = in.jump_h * l.spec.stride;
        s.jump_w = in.jump_w * l.spec.stride;
        s.offset_h = in.offset_h + ((l.spec.kernel_h - 1) / 2.0 - l.spec.pad_h) * in.jump_h;
        s.offset_w = in.offset_w + ((l.spec.kernel_w - 1) / 2.0 - l.spec.pad_w) * in.jump_w;
        break;
      }
      case LayerKind::Relu:
        s = state_of(l.inputs[0]);
        break;
      case LayerKind::MaxPool2: {
        const RfState& in = state_of(l.inputs[0]);
        s.rf_h = in.rf_h + in.jump_h;
        s.rf_w = in.rf_w + in.jump_w;
        s.jump_h = in.jump_h * 2;
        s.jump_w = in.jump_w * 2;
        s.offset_h = in.offset_h + 0.5 * in.jump_h;
        s.offset_w = in.offset_w + 0.5 * in.jump_w;
        break;
      }
      case LayerKind::EltwiseSum: {
        s = state_of(l.inputs[0]);
        for (const std::string& in_name : l.inputs) {
          const RfState& in = state_of(in_name);
          s.rf_h = std::max(s.rf_h, in.rf_h);
          s.rf_w = std::max(s.rf_w, in.rf_w);
        }
        break;
      }
      case LayerKind::Upsample2x: {
        const RfState& in = state_of(l.inputs[0]);
        s = in;
        s.jump_h = in.jump_h / 2;
        s.jump_w = in.jump_w / 2;
        s.offset_h = in.offset_h - 0.25 * in.jump_h;
        s.offset_w = in.offset_w - 0.25 * in.jump_w;
        break;
      }
      case LayerKind::CropCenterLike: {
        const RfState& in = state_of(l.inputs[0]);
        s = in;
        const LayerShape& is = shapes.at(l.inputs[0]);
        const LayerShape& rs = shapes.at(l.ref);
        s.offset_h = in.offset_h + ((is.h - rs.h) / 2) * in.jump_h;
        s.offset_w = in.offset_w + ((is.w - rs.w) / 2) * in.jump_w;
        break;
      }
      case LayerKind::ResizeToInput: {
        const RfState& in = state_of(l.inputs[0]);
        const LayerShape& is = shapes.at(l.inputs[0]);
        s = in;
        const double scale_h = static_cast<double>(is.h) / static_cast<double>(in_h);
        const double scale_w = static_cast<double>(is.w) / static_cast<double>(in_w);
        s.jump_h = in.jump_h * scale_h;
        s.jump_w = in.jump_w * scale_w;
        s.offset_h = in.offset_h + (0.5 * scale_h - 0.5) * in.jump_h;
        s.offset_w = in.offset_w + (0.5 * scale_w - 0.5) * in.jump_w;
        break;
      }
    }
    states[l.name] = s;
  }
  return states;
}

RfState analytic_rf(const NetworkGraph& graph, const std::string& layer_name, Eigen::Index in_h,
                    Eigen::Index in_w) {
  const auto states = analytic_rf(graph, in_h, in_w);
  const auto it = states.find(layer_name);
  if (it == states.end()) throw std::invalid_argument("analytic_rf: unknown layer " + layer_name);
  return it->second;
}

Footprint empirical_rf(const NetworkGraph& graph, const WeightStore& weights,
                       const std::string& layer_name, Eigen::Index cell_y, Eigen::Index cell_x,
                       Eigen::Index in_h, Eigen::Index in_w) {
  if (graph.index_of(layer_name) < 0)
    throw std::invalid_argument("empirical_rf: unknown layer " + layer_name);

  // Force weights positive so no path cancels away.
  std::map<std::string, Tensord> params;
  for (const auto& [name, tensor] : weights) {
    Tensord t = tensor.cast<double>();
    if (name.ends_with(".weight"))
      t.array() = t.array().abs() + 1e-3;
    else
      t.array().setZero();
    params.emplace(name, std::move(t));
  }

  const GraphRunner<double> runner(graph, params, /*probe_linear=*/true);
  Tensord image({3, in_h, in_w});
  image.array().setConstant(1.0);
  const ForwardPass<double> pass = runner.forward(image, /*retain=*/true);

  const Tensord& target = pass.acts.at(layer_name);
  if (cell_y < 0 || cell_y >= target.extent(1) || cell_x < 0 || cell_x >= target.extent(2)) {
    std::ostringstream os;
    os << "empirical_rf: cell (" << cell_y << ',' << cell_x << ") outside layer extent "
       << target.extent(1) << 'x' << target.extent(2);
    throw std::invalid_argument(os.str());
  }
  Tensord seed(target.shape());
  seed(0, cell_y, cell_x) = 1.0;

  const BackwardPass<double> back = runner.backward(pass, {{layer_name, seed}});
  Footprint fp;
  fp.x0 = in_w;
  fp.y0 = in_h;
  for (Eigen::Index y = 0; y < in_h; ++y)
    for (Eigen::Index x = 0; x < in_w; ++x) {
      bool hit = false;
      for (Eigen::Index c = 0; c < 3 && !hit; ++c)
        hit = std::abs(back.input_grad(c, y, x)) > 1e-12;
      if (!hit) continue;
      fp.x0 = std::min(fp.x0, x);
      fp.x1 = std::max(fp.x1, x);
      fp.y0 = std::min(fp.y0, y);
      fp.y1 = std::max(fp.y1, y);
    }
  return fp;
}

std::string rf_table(const NetworkGraph& graph, Eigen::Index in_h, Eigen::Index in_w) {
  const auto states = analytic_rf(graph, in_h, in_w);
  std::ostringstream os;
  os << "layer rf_h rf_w jump\n";
  for (const Layer& l : graph.layers) {
    const RfState& s = states.at(l.name);
    os << l.name << ' ' << s.rf_h << ' ' << s.rf_w << ' ' << s.jump_h;
    if (s.jump_w != s.jump_h) os << 'x' << s.jump_w;
    os << '\n';
  }
  const RfState& p5 = states.at("pool5");
  os << "# new pool-5 analytic receptive field: " << p5.rf_h << 'x' << p5.rf_w << " (jump "
     << p5.jump_h << ")\n"
     << "# reference design figure for this layer: 403x403; the recurrence above does not\n"
     << "# reproduce it, so both values are reported and neither is asserted.\n";
  return os.str();
}

}  // namespace cctn
