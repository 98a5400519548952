#include "cctn/graph.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cctn {

int NetworkGraph::index_of(const std::string& name) const {
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  return -1;
}

const Layer& NetworkGraph::layer(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw std::invalid_argument("graph: unknown layer " + name);
  return layers[static_cast<size_t>(i)];
}

namespace {

Eigen::Index scaled(Eigen::Index base, double m) {
  const Eigen::Index c = static_cast<Eigen::Index>(std::lround(base * m));
  return std::max<Eigen::Index>(1, c);
}

struct Builder {
  NetworkGraph g;
  std::string last;

  void add(Layer layer) {
    g.layers.push_back(std::move(layer));
    last = g.layers.back().name;
  }
  void conv(const std::string& name, const std::string& from, Eigen::Index in_c,
            Eigen::Index out_c, Eigen::Index kh, Eigen::Index kw, Eigen::Index ph,
            Eigen::Index pw) {
    Layer l;
    l.name = name;
    l.kind = LayerKind::Conv;
    l.inputs = {from};
    l.spec = ConvSpec{kh, kw, ph, pw, 1, in_c, out_c};
    add(std::move(l));
  }
  void relu(const std::string& name, const std::string& from) {
    add(Layer{name, LayerKind::Relu, {from}, {}, {}});
  }
  void pool(const std::string& name, const std::string& from) {
    add(Layer{name, LayerKind::MaxPool2, {from}, {}, {}});
  }
};

}  // namespace

NetworkGraph build_cctn_graph(HeadMode mode, double width_multiplier) {
  if (!(width_multiplier > 0.0))
    throw std::invalid_argument("build_cctn_graph: width multiplier must be positive");
  const double m = width_multiplier;
  const Eigen::Index c64 = scaled(64, m), c128 = scaled(128, m), c256 = scaled(256, m),
                     c512 = scaled(512, m);

  Builder b;
  b.g.mode = mode;
  b.g.width_multiplier = m;
  b.add(Layer{"input", LayerKind::Input, {}, {}, {}});

  b.conv("conv1_1", "input", 3, c64, 3, 3, 1, 1);
  b.relu("relu1_1", "conv1_1");
  b.conv("conv1_2", "relu1_1", c64, c64, 3, 3, 1, 1);
  b.relu("relu1_2", "conv1_2");
  b.pool("pool1", "relu1_2");

  b.conv("conv2_1", "pool1", c64, c128, 3, 3, 1, 1);
  b.relu("relu2_1", "conv2_1");
  b.conv("conv2_2", "relu2_1", c128, c128, 3, 3, 1, 1);
  b.relu("relu2_2", "conv2_2");
  b.pool("pool2", "relu2_2");

  b.conv("conv3_1", "pool2", c128, c256, 3, 3, 1, 1);
  b.relu("relu3_1", "conv3_1");
  b.conv("conv3_2", "relu3_1", c256, c256, 3, 3, 1, 1);
  b.relu("relu3_2", "conv3_2");
  b.conv("conv3_3", "relu3_2", c256, c256, 3, 3, 1, 1);
  b.relu("relu3_3", "conv3_3");
  b.pool("pool3", "relu3_3");

  b.conv("conv4_1", "pool3", c256, c512, 3, 3, 1, 1);
  b.relu("relu4_1", "conv4_1");
  b.conv("conv4_2", "relu4_1", c512, c512, 3, 3, 1, 1);
  b.relu("relu4_2", "conv4_2");
  b.conv("conv4_3", "relu4_2", c512, c512, 3, 3, 1, 1);
  b.relu("relu4_3", "conv4_3");
  b.pool("pool4", "relu4_3");

  // Parallel rectangle block: square, horizontal and vertical kernels with
  // paddings chosen so the three maps are equally sized.
  b.conv("rect3x3", "pool4", c512, c512, 3, 3, 1, 1);
  b.relu("relu_rect3x3", "rect3x3");
  b.conv("rect3x7", "pool4", c512, c512, 3, 7, 1, 3);
  b.relu("relu_rect3x7", "rect3x7");
  b.conv("rect7x3", "pool4", c512, c512, 7, 3, 3, 1);
  b.relu("relu_rect7x3", "rect7x3");
  b.add(Layer{"rect_sum",
              LayerKind::EltwiseSum,
              {"relu_rect3x3", "relu_rect3x7", "relu_rect7x3"},
              {},
              {}});
  b.pool("pool5", "rect_sum");

  b.conv("fc6", "pool5", c512, c512, 1, 1, 0, 0);
  b.relu("relu_fc6", "fc6");
  b.conv("fc7", "relu_fc6", c512, c512, 1, 1, 0, 0);

  b.add(Layer{"up_fc7", LayerKind::Upsample2x, {"fc7"}, {}, {}});
  b.add(Layer{"pool4_crop", LayerKind::CropCenterLike, {"pool4"}, {}, "up_fc7"});
  b.add(Layer{"fuse", LayerKind::EltwiseSum, {"up_fc7", "pool4_crop"}, {}, {}});

  if (mode == HeadMode::Coarse) {
    b.conv("head_tr", "fuse", c512, 2, 1, 1, 0, 0);
    b.add(Layer{"logits_tr", LayerKind::ResizeToInput, {"head_tr"}, {}, {}});
    b.g.heads = {{"tr", "logits_tr", HeadKind::Softmax2}};
  } else {
    b.conv("head_tl", "fuse", c512, 2, 1, 1, 0, 0);
    b.add(Layer{"logits_tl", LayerKind::ResizeToInput, {"head_tl"}, {}, {}});
    b.conv("head_cl", "fuse", c512, 1, 1, 1, 0, 0);
    b.add(Layer{"logits_cl", LayerKind::ResizeToInput, {"head_cl"}, {}, {}});
    b.g.heads = {{"tl", "logits_tl", HeadKind::Softmax2}, {"cl", "logits_cl", HeadKind::Sigmoid}};
  }
  return b.g;
}

std::map<std::string, LayerShape> compute_shapes(const NetworkGraph& graph, Eigen::Index in_h,
                                                 Eigen::Index in_w) {
  std::map<std::string, LayerShape> shapes;
  auto shape_of = [&](const std::string& name) -> const LayerShape& {
    auto it = shapes.find(name);
    if (it == shapes.end())
      throw std::invalid_argument("graph: layer references undefined input " + name);
    return it->second;
  };

  for (const Layer& l : graph.layers) {
    LayerShape s;
    switch (l.kind) {
      case LayerKind::Input:
        s = {3, in_h, in_w};
        break;
      case LayerKind::Conv: {
        const LayerShape& in = shape_of(l.inputs.at(0));
        if (in.c != l.spec.in_channels) {
          std::ostringstream os;
          os << "graph: " << l.name << " expects " << l.spec.in_channels << " channels, got "
             << in.c << " from " << l.inputs[0];
          throw std::invalid_argument(os.str());
        }
        s = {l.spec.out_channels, l.spec.out_h(in.h), l.spec.out_w(in.w)};
        if (s.h < 1 || s.w < 1)
          throw std::invalid_argument("graph: " + l.name + " output collapses to zero extent");
        break;
      }
      case LayerKind::Relu:
        s = shape_of(l.inputs.at(0));
        break;
      case LayerKind::MaxPool2: {
        const LayerShape& in = shape_of(l.inputs.at(0));
        if (in.h < 2 || in.w < 2) {
          std::ostringstream os;
          os << "graph: " << l.name << " input " << in.h << 'x' << in.w
             << " too small to pool; network input must be at least " << kMinInputExtent << 'x'
             << kMinInputExtent;
          throw std::invalid_argument(os.str());
        }
        s = {in.c, in.h / 2, in.w / 2};
        break;
      }
      case LayerKind::EltwiseSum: {
        s = shape_of(l.inputs.at(0));
        for (const std::string& in_name : l.inputs) {
          if (!(shape_of(in_name) == s)) {
            std::ostringstream os;
            os << "graph: " << l.name << " input shapes disagree (" << l.inputs[0] << " vs "
               << in_name << ')';
            throw std::invalid_argument(os.str());
          }
        }
        break;
      }
      case LayerKind::Upsample2x: {
        const LayerShape& in = shape_of(l.inputs.at(0));
        s = {in.c, in.h * 2, in.w * 2};
        break;
      }
      case LayerKind::CropCenterLike: {
        const LayerShape& in = shape_of(l.inputs.at(0));
        const LayerShape& ref = shape_of(l.ref);
        if (ref.h > in.h || ref.w > in.w)
          throw std::invalid_argument("graph: " + l.name + " crop target exceeds input");
        s = {in.c, ref.h, ref.w};
        break;
      }
      case LayerKind::ResizeToInput: {
        const LayerShape& in = shape_of(l.inputs.at(0));
        s = {in.c, in_h, in_w};
        break;
      }
    }
    shapes[l.name] = s;
  }
  return shapes;
}

GraphConfig load_graph_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  GraphConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "mode") {
        if (value == "coarse")
          cfg.mode = HeadMode::Coarse;
        else if (value == "fine")
          cfg.mode = HeadMode::Fine;
        else
          throw std::invalid_argument("mode must be coarse or fine");
      } else if (key == "width_multiplier") {
        cfg.width_multiplier = std::stod(value);
        if (!(cfg.width_multiplier > 0)) throw std::invalid_argument("must be positive");
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else if (key == "relu_between_1x1") {
        cfg.relu_between_1x1 = value;
      } else if (!key.empty()) {
        throw std::invalid_argument("unknown key");
      }
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "config: " << path << ':' << lineno << ": bad entry '" << key << "': " << e.what();
      throw std::runtime_error(os.str());
    }
  }
  return cfg;
}

void save_graph_config(const GraphConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << "mode = " << (cfg.mode == HeadMode::Coarse ? "coarse" : "fine") << '\n'
      << "width_multiplier = " << cfg.width_multiplier << '\n'
      << "seed = " << cfg.seed << '\n'
      << "relu_between_1x1 = " << cfg.relu_between_1x1 << '\n';
}

}  // namespace cctn
