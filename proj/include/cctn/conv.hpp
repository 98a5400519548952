#pragma once

#include "cctn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace cctn {

struct ConvSpec {
  Eigen::Index kernel_h = 1;
  Eigen::Index kernel_w = 1;
  Eigen::Index pad_h = 0;
  Eigen::Index pad_w = 0;
  Eigen::Index stride = 1;
  Eigen::Index in_channels = 1;
  Eigen::Index out_channels = 1;

  Eigen::Index out_extent(Eigen::Index in, Eigen::Index kernel, Eigen::Index pad) const {
    return (in + 2 * pad - kernel) / stride + 1;
  }
  Eigen::Index out_h(Eigen::Index in_h) const { return out_extent(in_h, kernel_h, pad_h); }
  Eigen::Index out_w(Eigen::Index in_w) const { return out_extent(in_w, kernel_w, pad_w); }

  void validate() const {
    if (kernel_h < 1 || kernel_w < 1) throw std::invalid_argument("conv: kernel extents must be positive");
    if (pad_h < 0 || pad_w < 0) throw std::invalid_argument("conv: negative padding");
    if (stride < 1) throw std::invalid_argument("conv: stride must be positive");
    if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("conv: channel counts must be positive");
  }
};

namespace detail {

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weights,
                       const Tensor<T>* bias, const ConvSpec& spec) {
  spec.validate();
  std::ostringstream os;
  if (input.rank() != 3) {
    os << "conv2d: input rank " << input.rank() << ", expected 3 (c,h,w)";
    throw std::invalid_argument(os.str());
  }
  if (input.extent(0) != spec.in_channels) {
    os << "conv2d: input channels " << input.extent(0) << " != spec.in_channels "
       << spec.in_channels;
    throw std::invalid_argument(os.str());
  }
  if (weights.rank() != 4 || weights.extent(0) != spec.out_channels ||
      weights.extent(1) != spec.in_channels || weights.extent(2) != spec.kernel_h ||
      weights.extent(3) != spec.kernel_w) {
    os << "conv2d: weight shape " << weights.shape_string() << " != (" << spec.out_channels
       << 'x' << spec.in_channels << 'x' << spec.kernel_h << 'x' << spec.kernel_w << ')';
    throw std::invalid_argument(os.str());
  }
  if (bias && (bias->rank() != 1 || bias->extent(0) != spec.out_channels)) {
    os << "conv2d: bias shape " << bias->shape_string() << " != (" << spec.out_channels << ')';
    throw std::invalid_argument(os.str());
  }
  if (spec.out_h(input.extent(1)) < 1 || spec.out_w(input.extent(2)) < 1) {
    os << "conv2d: input " << input.extent(1) << 'x' << input.extent(2)
       << " too small for kernel " << spec.kernel_h << 'x' << spec.kernel_w << " pad "
       << spec.pad_h << 'x' << spec.pad_w;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace detail

template <typename T>
void border_col(const Tensor<T>& input, const Tensor<T>& weights, const ConvSpec& spec,
                Eigen::Index o, Eigen::Index oy, Eigen::Index ox, double bias, T* out_row) {
  const Eigen::Index in_h = input.extent(1), in_w = input.extent(2);
  const Eigen::Index iy0 = oy * spec.stride - spec.pad_h;
  const Eigen::Index ix0 = ox * spec.stride - spec.pad_w;
  const Eigen::Index ky_lo = std::max<Eigen::Index>(0, -iy0);
  const Eigen::Index ky_hi = std::min(spec.kernel_h, in_h - iy0);
  const Eigen::Index kx_lo = std::max<Eigen::Index>(0, -ix0);
  const Eigen::Index kx_hi = std::min(spec.kernel_w, in_w - ix0);
  double acc = 0.0;
  for (Eigen::Index c = 0; c < spec.in_channels; ++c)
    for (Eigen::Index ky = ky_lo; ky < ky_hi; ++ky) {
      const T* in_row = &input(c, iy0 + ky, 0);
      const T* w_row = &weights(o, c, ky, 0);
      for (Eigen::Index kx = kx_lo; kx < kx_hi; ++kx)
        acc += static_cast<double>(in_row[ix0 + kx]) * static_cast<double>(w_row[kx]);
    }
  out_row[ox] = static_cast<T>(acc + bias);
}

// Direct convolution. Every output element accumulates in double precision in
// fixed (in-channel, ky, kx) order; outputs are bit-identical across runs.
// The x-tiled inner loops keep independent accumulator chains per output
// element without reordering any individual sum.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const Tensor<T>& bias, const ConvSpec& spec) {
  detail::check_conv_shapes(input, weights, &bias, spec);
  const Eigen::Index in_h = input.extent(1), in_w = input.extent(2);
  const Eigen::Index out_h = spec.out_h(in_h), out_w = spec.out_w(in_w);
  const Eigen::Index kh = spec.kernel_h, kw = spec.kernel_w, s = spec.stride;

  Tensor<T> out({spec.out_channels, out_h, out_w});

  constexpr Eigen::Index TILE = 8;
  const T* in_base = input.data();
  const T* w_base = weights.data();

  for (Eigen::Index o = 0; o < spec.out_channels; ++o) {
    const double b = static_cast<double>(bias[o]);
    for (Eigen::Index oy = 0; oy < out_h; ++oy) {
      const Eigen::Index iy0 = oy * s - spec.pad_h;
      const Eigen::Index ky_lo = std::max<Eigen::Index>(0, -iy0);
      const Eigen::Index ky_hi = std::min(kh, in_h - iy0);
      T* out_row = &out(o, oy, 0);

      // Interior columns: the whole kernel row is in bounds.
      Eigen::Index x_lo = out_w, x_hi = -1;
      if (s == 1) {
        x_lo = spec.pad_w;
        x_hi = in_w - kw + spec.pad_w;
      } else {
        for (Eigen::Index ox = 0; ox < out_w; ++ox) {
          const Eigen::Index ix0 = ox * s - spec.pad_w;
          if (ix0 >= 0 && ix0 + kw <= in_w) {
            x_lo = std::min(x_lo, ox);
            x_hi = std::max(x_hi, ox);
          }
        }
      }
      x_hi = std::min(x_hi, out_w - 1);
      x_lo = std::min(x_lo, out_w);

      Eigen::Index ox = x_lo;
      for (; ox + TILE <= x_hi + 1; ox += TILE) {
        double acc[TILE];
        for (Eigen::Index t = 0; t < TILE; ++t) acc[t] = 0.0;
        for (Eigen::Index c = 0; c < spec.in_channels; ++c) {
          for (Eigen::Index ky = ky_lo; ky < ky_hi; ++ky) {
            const T* in_row = in_base + (c * in_h + iy0 + ky) * in_w + (ox * s - spec.pad_w);
            const T* w_row = w_base + ((o * spec.in_channels + c) * kh + ky) * kw;
            for (Eigen::Index kx = 0; kx < kw; ++kx) {
              const double wv = static_cast<double>(w_row[kx]);
              for (Eigen::Index t = 0; t < TILE; ++t)
                acc[t] += static_cast<double>(in_row[t * s + kx]) * wv;
            }
          }
        }
        for (Eigen::Index t = 0; t < TILE; ++t) out_row[ox + t] = static_cast<T>(acc[t] + b);
      }

      // Remaining interior plus border columns, scalar path.
      for (Eigen::Index x = ox; x < out_w; ++x) border_col(input, weights, spec, o, oy, x, b, out_row);
      for (Eigen::Index x = 0; x < std::min(x_lo, out_w); ++x)
        border_col(input, weights, spec, o, oy, x, b, out_row);
    }
  }
  return out;
}

template <typename T>
struct ConvBackwardResult {
  Tensor<T> input_grad;
  Tensor<T> weight_grad;
  Tensor<T> bias_grad;
};

template <typename T>
ConvBackwardResult<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                                      const ConvSpec& spec, const Tensor<T>& upstream) {
  detail::check_conv_shapes<T>(input, weights, nullptr, spec);
  const Eigen::Index in_h = input.extent(1), in_w = input.extent(2);
  const Eigen::Index out_h = spec.out_h(in_h), out_w = spec.out_w(in_w);
  if (upstream.rank() != 3 || upstream.extent(0) != spec.out_channels ||
      upstream.extent(1) != out_h || upstream.extent(2) != out_w) {
    std::ostringstream os;
    os << "conv2d_backward: upstream shape " << upstream.shape_string() << " != ("
       << spec.out_channels << 'x' << out_h << 'x' << out_w << ')';
    throw std::invalid_argument(os.str());
  }
  const Eigen::Index kh = spec.kernel_h, kw = spec.kernel_w, s = spec.stride;

  ConvBackwardResult<T> r{Tensor<T>(input.shape()), Tensor<T>(weights.shape()),
                          Tensor<T>({spec.out_channels})};

  // Bias gradient: plain sums over the upstream maps.
  for (Eigen::Index o = 0; o < spec.out_channels; ++o) {
    double acc = 0.0;
    const T* up = &upstream(o, 0, 0);
    const Eigen::Index n = out_h * out_w;
    for (Eigen::Index i = 0; i < n; ++i) acc += static_cast<double>(up[i]);
    r.bias_grad[o] = static_cast<T>(acc);
  }

  // Weight gradient: per (o,c,ky) row, kx accumulators advance together in
  // (oy,ox) order, one double accumulator per weight element.
  {
    std::vector<double> acc(static_cast<size_t>(kw));
    for (Eigen::Index o = 0; o < spec.out_channels; ++o)
      for (Eigen::Index c = 0; c < spec.in_channels; ++c)
        for (Eigen::Index ky = 0; ky < kh; ++ky) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (Eigen::Index oy = 0; oy < out_h; ++oy) {
            const Eigen::Index iy = oy * s - spec.pad_h + ky;
            if (iy < 0 || iy >= in_h) continue;
            const T* up_row = &upstream(o, oy, 0);
            const T* in_row = &input(c, iy, 0);
            const Eigen::Index base = -spec.pad_w;
            for (Eigen::Index ox = 0; ox < out_w; ++ox) {
              const double u = static_cast<double>(up_row[ox]);
              const Eigen::Index ix0 = ox * s + base;
              const Eigen::Index lo = std::max<Eigen::Index>(0, -ix0);
              const Eigen::Index hi = std::min(kw, in_w - ix0);
              for (Eigen::Index kx = lo; kx < hi; ++kx)
                acc[static_cast<size_t>(kx)] += u * static_cast<double>(in_row[ix0 + kx]);
            }
          }
          T* wg = &r.weight_grad(o, c, ky, 0);
          for (Eigen::Index kx = 0; kx < kw; ++kx) wg[kx] = static_cast<T>(acc[static_cast<size_t>(kx)]);
        }
  }

  // Input gradient: gather form, fixed (o,ky,kx) order per input element.
  {
    constexpr Eigen::Index TILE = 8;
    for (Eigen::Index c = 0; c < spec.in_channels; ++c)
      for (Eigen::Index iy = 0; iy < in_h; ++iy) {
        T* gi_row = &r.input_grad(c, iy, 0);
        Eigen::Index ix = 0;
        for (; ix < in_w; ix += TILE) {
          const Eigen::Index tn = std::min(TILE, in_w - ix);
          double acc[TILE] = {0, 0, 0, 0, 0, 0, 0, 0};
          for (Eigen::Index o = 0; o < spec.out_channels; ++o)
            for (Eigen::Index ky = 0; ky < kh; ++ky) {
              const Eigen::Index num = iy + spec.pad_h - ky;
              if (s != 1 && (num % s) != 0) continue;
              const Eigen::Index oy = num / s;
              if (num < 0 || oy >= out_h) continue;
              const T* up_row = &upstream(o, oy, 0);
              const T* w_row = &weights(o, c, ky, 0);
              for (Eigen::Index kx = 0; kx < kw; ++kx) {
                const double wv = static_cast<double>(w_row[kx]);
                for (Eigen::Index t = 0; t < tn; ++t) {
                  const Eigen::Index numx = ix + t + spec.pad_w - kx;
                  if (s != 1 && (numx % s) != 0) continue;
                  const Eigen::Index ox = numx / s;
                  if (numx < 0 || ox >= out_w) continue;
                  acc[t] += static_cast<double>(up_row[ox]) * wv;
                }
              }
            }
          for (Eigen::Index t = 0; t < tn; ++t) gi_row[ix + t] = static_cast<T>(acc[t]);
        }
      }
  }
  return r;
}

}  // namespace cctn
