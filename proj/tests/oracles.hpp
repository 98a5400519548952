#pragma once

// Independent reference implementations used as test oracles. Everything in
// this header is deliberately written as plain nested loops or brute-force
// sweeps, sharing no code path with the library implementations it checks.

#include "cctn/conv.hpp"
#include "cctn/rng.hpp"
#include "cctn/tensor.hpp"
#include "cctn/types.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using cctn::ConvSpec;
using cctn::Rng;
using cctn::Tensor;

// Naive O(n^4) convolution with zero padding.
template <typename T>
Tensor<T> naive_conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                       const ConvSpec& spec) {
  const Eigen::Index in_h = input.extent(1), in_w = input.extent(2);
  const Eigen::Index out_h = spec.out_h(in_h), out_w = spec.out_w(in_w);
  Tensor<T> out({spec.out_channels, out_h, out_w});
  for (Eigen::Index o = 0; o < spec.out_channels; ++o)
    for (Eigen::Index oy = 0; oy < out_h; ++oy)
      for (Eigen::Index ox = 0; ox < out_w; ++ox) {
        double acc = static_cast<double>(bias[o]);
        for (Eigen::Index c = 0; c < spec.in_channels; ++c)
          for (Eigen::Index ky = 0; ky < spec.kernel_h; ++ky)
            for (Eigen::Index kx = 0; kx < spec.kernel_w; ++kx) {
              const Eigen::Index iy = oy * spec.stride - spec.pad_h + ky;
              const Eigen::Index ix = ox * spec.stride - spec.pad_w + kx;
              if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) continue;
              acc += static_cast<double>(input(c, iy, ix)) *
                     static_cast<double>(weights(o, c, ky, kx));
            }
        out(o, oy, ox) = static_cast<T>(acc);
      }
  return out;
}

// Central finite differences of a scalar function with respect to one tensor.
inline Tensor<double> finite_difference(const std::function<double()>& f, Tensor<double>& x,
                                        double step = 1e-4) {
  Tensor<double> grad(x.shape());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = f();
    x[i] = saved - step;
    const double fm = f();
    x[i] = saved;
    grad[i] = (fp - fm) / (2 * step);
  }
  return grad;
}

inline double max_rel_error(const Tensor<double>& a, const Tensor<double>& b,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

template <typename T>
Tensor<T> random_tensor(std::vector<Eigen::Index> shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Recursive flood fill, 8-connectivity; returns a label per pixel (-1 off).
inline std::vector<int> flood_fill_labels(const cctn::MapU8& mask) {
  const Eigen::Index h = mask.rows(), w = mask.cols();
  std::vector<int> labels(static_cast<size_t>(h * w), -1);
  int next = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  for (Eigen::Index y0 = 0; y0 < h; ++y0)
    for (Eigen::Index x0 = 0; x0 < w; ++x0) {
      if (!mask(y0, x0) || labels[static_cast<size_t>(y0 * w + x0)] >= 0) continue;
      const int label = next++;
      stack.push_back({y0, x0});
      labels[static_cast<size_t>(y0 * w + x0)] = label;
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        for (Eigen::Index dy = -1; dy <= 1; ++dy)
          for (Eigen::Index dx = -1; dx <= 1; ++dx) {
            const Eigen::Index ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            if (!mask(ny, nx) || labels[static_cast<size_t>(ny * w + nx)] >= 0) continue;
            labels[static_cast<size_t>(ny * w + nx)] = label;
            stack.push_back({ny, nx});
          }
      }
    }
  return labels;
}

// Brute-force minimum-area rectangle: axis-aligned bounding box area under a
// rotation sweep in 0.1 degree steps.
inline double sweep_min_rect_area(const std::vector<Eigen::Vector2d>& points) {
  double best = 1e300;
  for (double deg = 0.0; deg < 90.0; deg += 0.1) {
    const double a = deg * M_PI / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    double ulo = 1e300, uhi = -1e300, vlo = 1e300, vhi = -1e300;
    for (const auto& p : points) {
      const double u = ca * p.x() + sa * p.y();
      const double v = -sa * p.x() + ca * p.y();
      ulo = std::min(ulo, u);
      uhi = std::max(uhi, u);
      vlo = std::min(vlo, v);
      vhi = std::max(vhi, v);
    }
    best = std::min(best, (uhi - ulo) * (vhi - vlo));
  }
  return best;
}

// Closed-form bilinear interpolation at one output position.
inline double bilinear_at(const Tensor<double>& input, Eigen::Index c, double pos_y,
                          double pos_x) {
  const Eigen::Index h = input.extent(1), w = input.extent(2);
  pos_y = std::min(std::max(pos_y, 0.0), static_cast<double>(h - 1));
  pos_x = std::min(std::max(pos_x, 0.0), static_cast<double>(w - 1));
  const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(pos_y));
  const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(pos_x));
  const Eigen::Index y1 = std::min(y0 + 1, h - 1);
  const Eigen::Index x1 = std::min(x0 + 1, w - 1);
  const double fy = pos_y - y0, fx = pos_x - x0;
  return input(c, y0, x0) * (1 - fy) * (1 - fx) + input(c, y0, x1) * (1 - fy) * fx +
         input(c, y1, x0) * fy * (1 - fx) + input(c, y1, x1) * fy * fx;
}

}  // namespace oracle
