#pragma once

#include "cctn/tensor.hpp"
#include "cctn/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cctn {

// ---------------------------------------------------------------------------
// max pooling, 2x2 kernel, stride 2

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<Eigen::Index> argmax;  // flat input index per output element
};

template <typename T>
PoolResult<T> maxpool2(const Tensor<T>& input) {
  if (input.rank() != 3) throw std::invalid_argument("maxpool2: input rank != 3");
  const Eigen::Index c = input.extent(0), h = input.extent(1), w = input.extent(2);
  if (h < 2 || w < 2) {
    std::ostringstream os;
    os << "maxpool2: spatial extents " << h << 'x' << w << " below 2x2";
    throw std::invalid_argument(os.str());
  }
  const Eigen::Index oh = h / 2, ow = w / 2;
  PoolResult<T> r{Tensor<T>({c, oh, ow}), {}};
  r.argmax.resize(static_cast<size_t>(c * oh * ow));
  Eigen::Index k = 0;
  for (Eigen::Index ci = 0; ci < c; ++ci)
    for (Eigen::Index oy = 0; oy < oh; ++oy)
      for (Eigen::Index ox = 0; ox < ow; ++ox, ++k) {
        const Eigen::Index y = 2 * oy, x = 2 * ox;
        Eigen::Index best = (ci * h + y) * w + x;
        T bv = input[best];
        const Eigen::Index cand[3] = {(ci * h + y) * w + x + 1, (ci * h + y + 1) * w + x,
                                      (ci * h + y + 1) * w + x + 1};
        for (Eigen::Index idx : cand)
          if (input[idx] > bv) {
            bv = input[idx];
            best = idx;
          }
        r.output[k] = bv;
        r.argmax[static_cast<size_t>(k)] = best;
      }
  return r;
}

template <typename T>
Tensor<T> maxpool2_backward(const std::vector<Eigen::Index>& argmax,
                            const std::vector<Eigen::Index>& input_shape,
                            const Tensor<T>& upstream) {
  Tensor<T> grad(input_shape);
  for (Eigen::Index k = 0; k < upstream.size(); ++k)
    grad[argmax[static_cast<size_t>(k)]] += upstream[k];
  return grad;
}

// Average pooling over the same 2x2 windows. Used only by the receptive-field
// probe, where max-pooling would mask paths through non-argmax cells.
template <typename T>
Tensor<T> avgpool2(const Tensor<T>& input) {
  const Eigen::Index c = input.extent(0), h = input.extent(1), w = input.extent(2);
  Tensor<T> out({c, h / 2, w / 2});
  for (Eigen::Index ci = 0; ci < c; ++ci)
    for (Eigen::Index oy = 0; oy < h / 2; ++oy)
      for (Eigen::Index ox = 0; ox < w / 2; ++ox)
        out(ci, oy, ox) = static_cast<T>(
            (static_cast<double>(input(ci, 2 * oy, 2 * ox)) +
             static_cast<double>(input(ci, 2 * oy, 2 * ox + 1)) +
             static_cast<double>(input(ci, 2 * oy + 1, 2 * ox)) +
             static_cast<double>(input(ci, 2 * oy + 1, 2 * ox + 1))) *
            0.25);
  return out;
}

template <typename T>
Tensor<T> avgpool2_backward(const std::vector<Eigen::Index>& input_shape,
                            const Tensor<T>& upstream) {
  Tensor<T> grad(input_shape);
  const Eigen::Index c = input_shape[0], h = input_shape[1], w = input_shape[2];
  for (Eigen::Index ci = 0; ci < c; ++ci)
    for (Eigen::Index oy = 0; oy < h / 2; ++oy)
      for (Eigen::Index ox = 0; ox < w / 2; ++ox) {
        const T g = static_cast<T>(static_cast<double>(upstream(ci, oy, ox)) * 0.25);
        grad(ci, 2 * oy, 2 * ox) += g;
        grad(ci, 2 * oy, 2 * ox + 1) += g;
        grad(ci, 2 * oy + 1, 2 * ox) += g;
        grad(ci, 2 * oy + 1, 2 * ox + 1) += g;
      }
  return grad;
}

// ---------------------------------------------------------------------------
// relu

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  out.array() = input.array().max(T(0));
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream) {
  if (!input.same_shape(upstream))
    throw std::invalid_argument("relu_backward: shape mismatch");
  Tensor<T> grad(input.shape());
  grad.array() = (input.array() > T(0)).select(upstream.array(), T(0));
  return grad;
}

// ---------------------------------------------------------------------------
// element-wise sum

template <typename T>
Tensor<T> eltwise_sum(const std::vector<const Tensor<T>*>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("eltwise_sum: no inputs");
  Tensor<T> out(inputs[0]->shape());
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i]->same_shape(out)) {
      std::ostringstream os;
      os << "eltwise_sum: input " << i << " shape " << inputs[i]->shape_string()
         << " != " << out.shape_string();
      throw std::invalid_argument(os.str());
    }
    out.array() += inputs[i]->array();
  }
  return out;
}

// ---------------------------------------------------------------------------
// bilinear resize (half-pixel-center convention, clamped at borders)

template <typename T>
struct ResizeTap {
  Eigen::Index i0, i1;
  T w0, w1;
};

template <typename T>
std::vector<ResizeTap<T>> resize_taps(Eigen::Index in_extent, Eigen::Index out_extent) {
  std::vector<ResizeTap<T>> taps(static_cast<size_t>(out_extent));
  const double scale = static_cast<double>(in_extent) / static_cast<double>(out_extent);
  for (Eigen::Index i = 0; i < out_extent; ++i) {
    double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
    pos = std::min(std::max(pos, 0.0), static_cast<double>(in_extent - 1));
    const Eigen::Index i0 = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index i1 = std::min(i0 + 1, in_extent - 1);
    const double f = pos - static_cast<double>(i0);
    taps[static_cast<size_t>(i)] = {i0, i1, static_cast<T>(1.0 - f), static_cast<T>(f)};
  }
  return taps;
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& input, Eigen::Index out_h, Eigen::Index out_w) {
  if (input.rank() != 3) throw std::invalid_argument("resize_bilinear: input rank != 3");
  const Eigen::Index c = input.extent(0);
  const auto ty = resize_taps<double>(input.extent(1), out_h);
  const auto tx = resize_taps<double>(input.extent(2), out_w);
  Tensor<T> out({c, out_h, out_w});
  for (Eigen::Index ci = 0; ci < c; ++ci)
    for (Eigen::Index y = 0; y < out_h; ++y) {
      const auto& py = ty[static_cast<size_t>(y)];
      const T* r0 = &input(ci, py.i0, 0);
      const T* r1 = &input(ci, py.i1, 0);
      T* o = &out(ci, y, 0);
      for (Eigen::Index x = 0; x < out_w; ++x) {
        const auto& px = tx[static_cast<size_t>(x)];
        const double top = static_cast<double>(r0[px.i0]) * px.w0 + static_cast<double>(r0[px.i1]) * px.w1;
        const double bot = static_cast<double>(r1[px.i0]) * px.w0 + static_cast<double>(r1[px.i1]) * px.w1;
        o[x] = static_cast<T>(top * py.w0 + bot * py.w1);
      }
    }
  return out;
}

// Exact transpose of resize_bilinear.
template <typename T>
Tensor<T> resize_bilinear_backward(const std::vector<Eigen::Index>& input_shape,
                                   const Tensor<T>& upstream) {
  const Eigen::Index c = input_shape[0], in_h = input_shape[1], in_w = input_shape[2];
  const auto ty = resize_taps<double>(in_h, upstream.extent(1));
  const auto tx = resize_taps<double>(in_w, upstream.extent(2));
  Tensor<T> grad(input_shape);
  for (Eigen::Index ci = 0; ci < c; ++ci)
    for (Eigen::Index y = 0; y < upstream.extent(1); ++y) {
      const auto& py = ty[static_cast<size_t>(y)];
      for (Eigen::Index x = 0; x < upstream.extent(2); ++x) {
        const auto& px = tx[static_cast<size_t>(x)];
        const double u = static_cast<double>(upstream(ci, y, x));
        grad(ci, py.i0, px.i0) += static_cast<T>(u * py.w0 * px.w0);
        grad(ci, py.i0, px.i1) += static_cast<T>(u * py.w0 * px.w1);
        grad(ci, py.i1, px.i0) += static_cast<T>(u * py.w1 * px.w0);
        grad(ci, py.i1, px.i1) += static_cast<T>(u * py.w1 * px.w1);
      }
    }
  return grad;
}

template <typename T>
Tensor<T> upsample2x_bilinear(const Tensor<T>& input) {
  return resize_bilinear(input, 2 * input.extent(1), 2 * input.extent(2));
}

// ---------------------------------------------------------------------------
// center crop (off-by-one removed from the bottom/right)

template <typename T>
Tensor<T> crop_center(const Tensor<T>& input, Eigen::Index target_h, Eigen::Index target_w) {
  const Eigen::Index c = input.extent(0), h = input.extent(1), w = input.extent(2);
  if (target_h > h || target_w > w) {
    std::ostringstream os;
    os << "crop_center: target " << target_h << 'x' << target_w << " exceeds input " << h
       << 'x' << w;
    throw std::invalid_argument(os.str());
  }
  const Eigen::Index oy = (h - target_h) / 2, ox = (w - target_w) / 2;
  Tensor<T> out({c, target_h, target_w});
  for (Eigen::Index ci = 0; ci < c; ++ci)
    for (Eigen::Index y = 0; y < target_h; ++y)
      std::copy_n(&input(ci, oy + y, ox), target_w, &out(ci, y, 0));
  return out;
}

template <typename T>
Tensor<T> crop_center_backward(const std::vector<Eigen::Index>& input_shape,
                               const Tensor<T>& upstream) {
  const Eigen::Index h = input_shape[1], w = input_shape[2];
  const Eigen::Index th = upstream.extent(1), tw = upstream.extent(2);
  const Eigen::Index oy = (h - th) / 2, ox = (w - tw) / 2;
  Tensor<T> grad(input_shape);
  for (Eigen::Index ci = 0; ci < input_shape[0]; ++ci)
    for (Eigen::Index y = 0; y < th; ++y)
      std::copy_n(&upstream(ci, y, 0), tw, &grad(ci, oy + y, ox));
  return grad;
}

// ---------------------------------------------------------------------------
// probability heads

// Two-channel softmax over logits; returns both per-pixel class probabilities.
template <typename T>
Tensor<T> softmax2(const Tensor<T>& logits) {
  if (logits.rank() != 3 || logits.extent(0) != 2)
    throw std::invalid_argument("softmax2: logits must have 2 channels");
  const Eigen::Index h = logits.extent(1), w = logits.extent(2);
  Tensor<T> probs({2, h, w});
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const double d = static_cast<double>(logits(1, y, x)) - static_cast<double>(logits(0, y, x));
      const double p1 = 1.0 / (1.0 + std::exp(-d));
      probs(1, y, x) = static_cast<T>(p1);
      probs(0, y, x) = static_cast<T>(1.0 - p1);
    }
  return probs;
}

// Probability of the positive (text) class.
template <typename T>
Map2<T> softmax2_map(const Tensor<T>& logits) {
  Tensor<T> p = softmax2(logits);
  Map2<T> m(logits.extent(1), logits.extent(2));
  std::copy_n(&p(1, 0, 0), m.size(), m.data());
  return m;
}

template <typename T>
Map2<T> sigmoid_map(const Tensor<T>& logits) {
  if (logits.rank() != 3 || logits.extent(0) != 1)
    throw std::invalid_argument("sigmoid_map: logits must have 1 channel");
  Map2<T> m(logits.extent(1), logits.extent(2));
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(logits[i]))));
  return m;
}

// ---------------------------------------------------------------------------
// losses (mean over pixels), gradients with respect to logits

template <typename T>
struct LossResult {
  double loss;
  Tensor<T> grad;
};

// Pixel-wise two-class cross-entropy with softmax; target values in {0,1}.
template <typename T>
LossResult<T> softmax_xent_loss(const Tensor<T>& logits, const Map2<T>& target) {
  if (logits.rank() != 3 || logits.extent(0) != 2)
    throw std::invalid_argument("softmax_xent_loss: logits must have 2 channels");
  if (logits.extent(1) != target.rows() || logits.extent(2) != target.cols())
    throw std::invalid_argument("softmax_xent_loss: target size mismatch");
  const Eigen::Index h = logits.extent(1), w = logits.extent(2);
  const double inv_n = 1.0 / static_cast<double>(h * w);
  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  double loss = 0.0;
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const double z0 = static_cast<double>(logits(0, y, x));
      const double z1 = static_cast<double>(logits(1, y, x));
      const double m = std::max(z0, z1);
      const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
      const double t = static_cast<double>(target(y, x));
      loss += lse - (t > 0.5 ? z1 : z0);
      const double p1 = std::exp(z1 - lse);
      r.grad(0, y, x) = static_cast<T>(((1.0 - p1) - (t > 0.5 ? 0.0 : 1.0)) * inv_n);
      r.grad(1, y, x) = static_cast<T>((p1 - (t > 0.5 ? 1.0 : 0.0)) * inv_n);
    }
  r.loss = loss * inv_n;
  return r;
}

// Binary cross-entropy on logits against a soft target in [0,1].
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& logits, const Map2<T>& target) {
  if (logits.rank() != 3 || logits.extent(0) != 1)
    throw std::invalid_argument("bce_loss: logits must have 1 channel");
  if (logits.extent(1) != target.rows() || logits.extent(2) != target.cols())
    throw std::invalid_argument("bce_loss: target size mismatch");
  const Eigen::Index n = logits.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = static_cast<double>(logits[i]);
    const double t = static_cast<double>(target.data()[i]);
    loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    const double s = 1.0 / (1.0 + std::exp(-z));
    r.grad[i] = static_cast<T>((s - t) * inv_n);
  }
  r.loss = loss * inv_n;
  return r;
}

// ---------------------------------------------------------------------------
// SGD with momentum: v <- momentum*v - lr*g; p <- p + v

template <typename T>
void sgd_momentum_step(Tensor<T>& params, const Tensor<T>& grads, Tensor<T>& velocity,
                       double lr, double momentum) {
  if (!params.same_shape(grads) || !params.same_shape(velocity))
    throw std::invalid_argument("sgd_momentum_step: shape mismatch");
  velocity.array() = static_cast<T>(momentum) * velocity.array() - static_cast<T>(lr) * grads.array();
  params.array() += velocity.array();
}

}  // namespace cctn
