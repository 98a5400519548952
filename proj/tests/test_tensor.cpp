#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cctn/conv.hpp"
#include "cctn/ops.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace cctn;

namespace {

Tensord ones(std::vector<Eigen::Index> shape) {
  Tensord t(std::move(shape));
  t.array().setConstant(1.0);
  return t;
}

}  // namespace

TEST_CASE("conv2d zero input gives zero output") {
  Rng rng(1);
  Tensord input({1, 1, 1});
  Tensord w = oracle::random_tensor<double>({4, 1, 1, 1}, rng);
  Tensord b({4});
  ConvSpec spec{1, 1, 0, 0, 1, 1, 4};
  const Tensord out = conv2d_forward(input, w, b, spec);
  CHECK(out.array().abs().maxCoeff() == 0.0);
}

TEST_CASE("conv2d all-ones 3x3 counts overlapped ones") {
  Tensord input = ones({1, 3, 3});
  Tensord w = ones({1, 1, 3, 3});
  Tensord b({1});
  ConvSpec spec{3, 3, 1, 1, 1, 1, 1};
  const Tensord out = conv2d_forward(input, w, b, spec);
  CHECK(out.extent(1) == 3);
  CHECK(out(0, 1, 1) == doctest::Approx(9.0));
  CHECK(out(0, 0, 0) == doctest::Approx(4.0));
  CHECK(out(0, 0, 1) == doctest::Approx(6.0));
}

TEST_CASE("conv2d rectangle kernel matches the naive loop oracle") {
  Rng rng(7);
  Tensord input = oracle::random_tensor<double>({2, 9, 9}, rng);
  Tensord w = oracle::random_tensor<double>({3, 2, 3, 7}, rng);
  Tensord b = oracle::random_tensor<double>({3}, rng);
  ConvSpec spec{3, 7, 1, 3, 1, 2, 3};
  const Tensord got = conv2d_forward(input, w, b, spec);
  CHECK(got.extent(1) == 9);
  CHECK(got.extent(2) == 9);
  const Tensord want = oracle::naive_conv2d(input, w, b, spec);
  for (Eigen::Index i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("conv2d rejects mismatched shapes with a diagnostic") {
  Tensord input({2, 5, 5});
  Tensord w({1, 3, 3, 3});
  Tensord b({1});
  ConvSpec spec{3, 3, 1, 1, 1, 3, 1};
  CHECK_THROWS_WITH_AS(conv2d_forward(input, w, b, spec),
                       doctest::Contains("input channels 2"), std::invalid_argument);
  ConvSpec spec2{3, 3, 1, 1, 1, 2, 1};
  CHECK_THROWS_AS(conv2d_forward(input, w, b, spec2), std::invalid_argument);
}

TEST_CASE("conv2d identical spatial extents for the three rectangle kernels") {
  Rng rng(3);
  for (const Eigen::Index size : {9, 14, 31}) {
    Tensord input = oracle::random_tensor<double>({1, size, size + 3}, rng);
    Tensord b({1});
    const ConvSpec specs[3] = {{3, 3, 1, 1, 1, 1, 1}, {3, 7, 1, 3, 1, 1, 1}, {7, 3, 3, 1, 1, 1, 1}};
    for (const ConvSpec& spec : specs) {
      Tensord w = ones({1, 1, spec.kernel_h, spec.kernel_w});
      const Tensord out = conv2d_forward(input, w, b, spec);
      CHECK(out.extent(1) == size);
      CHECK(out.extent(2) == size + 3);
    }
  }
}

TEST_CASE("conv2d backward: zero upstream, 1x1 identity, finite differences") {
  Rng rng(11);
  Tensord input = oracle::random_tensor<double>({2, 5, 5}, rng);
  Tensord w = oracle::random_tensor<double>({2, 2, 3, 3}, rng);
  ConvSpec spec{3, 3, 1, 1, 1, 2, 2};

  SUBCASE("zero upstream gradient gives zero gradients") {
    Tensord up({2, 5, 5});
    const auto grads = conv2d_backward(input, w, spec, up);
    CHECK(grads.input_grad.array().abs().maxCoeff() == 0.0);
    CHECK(grads.weight_grad.array().abs().maxCoeff() == 0.0);
    CHECK(grads.bias_grad.array().abs().maxCoeff() == 0.0);
  }

  SUBCASE("1x1 kernel weight gradient is the input-upstream correlation") {
    ConvSpec s1{1, 1, 0, 0, 1, 1, 1};
    Tensord in1 = oracle::random_tensor<double>({1, 4, 4}, rng);
    Tensord w1 = oracle::random_tensor<double>({1, 1, 1, 1}, rng);
    Tensord up = oracle::random_tensor<double>({1, 4, 4}, rng);
    const auto grads = conv2d_backward(in1, w1, s1, up);
    double expect = 0.0;
    for (Eigen::Index i = 0; i < in1.size(); ++i) expect += in1[i] * up[i];
    CHECK(grads.weight_grad[0] == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("gradients match central finite differences") {
    Tensord up = oracle::random_tensor<double>({2, 5, 5}, rng);
    Tensord bias = oracle::random_tensor<double>({2}, rng);
    const auto grads = conv2d_backward(input, w, spec, up);

    auto loss = [&]() {
      const Tensord out = conv2d_forward(input, w, bias, spec);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < out.size(); ++i) acc += out[i] * up[i];
      return acc;
    };
    const Tensord fd_input = oracle::finite_difference(loss, input);
    CHECK(oracle::max_rel_error(fd_input, grads.input_grad) < 1e-4);
    const Tensord fd_w = oracle::finite_difference(loss, w);
    CHECK(oracle::max_rel_error(fd_w, grads.weight_grad) < 1e-4);
  }
}

TEST_CASE("maxpool2 forward and backward") {
  SUBCASE("constant input stays constant") {
    Tensord input = ones({1, 4, 4});
    input.array() *= 3.25;
    const auto r = maxpool2(input);
    CHECK(r.output.extent(1) == 2);
    CHECK(r.output.array().minCoeff() == doctest::Approx(3.25));
  }

  SUBCASE("distinct values match the nested-loop window maximum") {
    Rng rng(5);
    Tensord input = oracle::random_tensor<double>({2, 4, 4}, rng);
    const auto r = maxpool2(input);
    for (Eigen::Index c = 0; c < 2; ++c)
      for (Eigen::Index y = 0; y < 2; ++y)
        for (Eigen::Index x = 0; x < 2; ++x) {
          double m = -1e300;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              m = std::max(m, input(c, 2 * y + dy, 2 * x + dx));
          CHECK(r.output(c, y, x) == doctest::Approx(m));
        }
  }

  SUBCASE("odd extent drops the last row and column") {
    Tensord input = ones({1, 5, 5});
    const auto r = maxpool2(input);
    CHECK(r.output.extent(1) == 2);
    CHECK(r.output.extent(2) == 2);
  }

  SUBCASE("backward routes gradient to the argmax cell") {
    Rng rng(6);
    Tensord input = oracle::random_tensor<double>({1, 6, 6}, rng);
    auto r = maxpool2(input);
    Tensord up = oracle::random_tensor<double>({1, 3, 3}, rng);
    const Tensord gi = maxpool2_backward(r.argmax, input.shape(), up);

    auto loss = [&]() {
      const auto rr = maxpool2(input);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < rr.output.size(); ++i) acc += rr.output[i] * up[i];
      return acc;
    };
    const Tensord fd = oracle::finite_difference(loss, input, 1e-6);
    CHECK(oracle::max_rel_error(fd, gi) < 1e-4);
  }

  SUBCASE("rejects tiny inputs") {
    Tensord input({1, 1, 5});
    CHECK_THROWS_AS(maxpool2(input), std::invalid_argument);
  }
}

TEST_CASE("relu forward and gradient") {
  Tensord input({1, 1, 4});
  input[0] = -2.0;
  input[1] = -1e-9;
  input[2] = 0.0;
  input[3] = 3.5;
  const Tensord out = relu(input);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);
  CHECK(out[3] == 3.5);

  Rng rng(8);
  Tensord x = oracle::random_tensor<double>({2, 3, 3}, rng);
  Tensord up = oracle::random_tensor<double>({2, 3, 3}, rng);
  const Tensord gi = relu_backward(x, up);
  auto loss = [&]() {
    const Tensord y = relu(x);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) acc += y[i] * up[i];
    return acc;
  };
  const Tensord fd = oracle::finite_difference(loss, x, 1e-6);
  CHECK(oracle::max_rel_error(fd, gi) < 1e-4);
}

TEST_CASE("eltwise_sum") {
  Tensord a({1, 2, 2}), b({1, 2, 2});
  SUBCASE("two zero tensors give zero") {
    const Tensord out = eltwise_sum<double>({&a, &b});
    CHECK(out.array().abs().maxCoeff() == 0.0);
  }
  SUBCASE("x plus minus-x cancels") {
    Rng rng(2);
    Tensord x = oracle::random_tensor<double>({1, 2, 2}, rng);
    Tensord nx(x.shape());
    nx.array() = -x.array();
    const Tensord out = eltwise_sum<double>({&x, &nx});
    CHECK(out.array().abs().maxCoeff() == 0.0);
  }
  SUBCASE("three random tensors match the loop oracle") {
    Rng rng(4);
    Tensord x = oracle::random_tensor<double>({2, 3, 3}, rng);
    Tensord y = oracle::random_tensor<double>({2, 3, 3}, rng);
    Tensord z = oracle::random_tensor<double>({2, 3, 3}, rng);
    const Tensord out = eltwise_sum<double>({&x, &y, &z});
    for (Eigen::Index i = 0; i < out.size(); ++i)
      CHECK(out[i] == doctest::Approx(x[i] + y[i] + z[i]));
  }
  SUBCASE("fixed input order is bit-identical across runs") {
    Rng rng(9);
    Tensord x = oracle::random_tensor<double>({1, 3, 3}, rng);
    Tensord y = oracle::random_tensor<double>({1, 3, 3}, rng);
    const Tensord out1 = eltwise_sum<double>({&x, &y});
    const Tensord out2 = eltwise_sum<double>({&x, &y});
    for (Eigen::Index i = 0; i < out1.size(); ++i) CHECK(out1[i] == out2[i]);
  }
  SUBCASE("shape mismatch rejected") {
    Tensord c({1, 2, 3});
    CHECK_THROWS_AS(eltwise_sum<double>({&a, &c}), std::invalid_argument);
  }
}

TEST_CASE("bilinear upsampling") {
  SUBCASE("constant map stays constant") {
    Tensord input = ones({1, 3, 3});
    input.array() *= 0.7;
    const Tensord out = upsample2x_bilinear(input);
    CHECK(out.extent(1) == 6);
    CHECK(std::abs(out.array().maxCoeff() - 0.7) < 1e-15);
    CHECK(std::abs(out.array().minCoeff() - 0.7) < 1e-15);
  }
  SUBCASE("1x1 map broadcasts its value") {
    Tensord input({1, 1, 1});
    input[0] = 2.5;
    const Tensord out = upsample2x_bilinear(input);
    CHECK(out.extent(1) == 2);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(out[i] == 2.5);
  }
  SUBCASE("random 3x3 matches the closed-form interpolation") {
    Rng rng(10);
    Tensord input = oracle::random_tensor<double>({1, 3, 3}, rng);
    const Tensord out = upsample2x_bilinear(input);
    for (Eigen::Index y = 0; y < 6; ++y)
      for (Eigen::Index x = 0; x < 6; ++x) {
        const double want = oracle::bilinear_at(input, 0, (y + 0.5) / 2 - 0.5, (x + 0.5) / 2 - 0.5);
        CHECK(out(0, y, x) == doctest::Approx(want).epsilon(1e-12));
      }
  }
  SUBCASE("backward is the exact transpose (finite differences)") {
    Rng rng(12);
    Tensord input = oracle::random_tensor<double>({1, 3, 4}, rng);
    Tensord up = oracle::random_tensor<double>({1, 7, 5}, rng);
    const Tensord gi = resize_bilinear_backward(input.shape(), up);
    auto loss = [&]() {
      const Tensord out = resize_bilinear(input, 7, 5);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < out.size(); ++i) acc += out[i] * up[i];
      return acc;
    };
    const Tensord fd = oracle::finite_difference(loss, input);
    CHECK(oracle::max_rel_error(fd, gi) < 1e-4);
  }
}

TEST_CASE("crop_center") {
  Rng rng(13);
  Tensord input = oracle::random_tensor<double>({1, 5, 6}, rng);
  const Tensord out = crop_center(input, 4, 4);
  CHECK(out.extent(1) == 4);
  // 5->4: offset floor(1/2)=0, extra row removed from the bottom;
  // 6->4: offset 1.
  for (Eigen::Index y = 0; y < 4; ++y)
    for (Eigen::Index x = 0; x < 4; ++x) CHECK(out(0, y, x) == input(0, y, x + 1));
  CHECK_THROWS_AS(crop_center(input, 7, 4), std::invalid_argument);

  Tensord up = oracle::random_tensor<double>({1, 4, 4}, rng);
  const Tensord gi = crop_center_backward(input.shape(), up);
  auto loss = [&]() {
    const Tensord o = crop_center(input, 4, 4);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < o.size(); ++i) acc += o[i] * up[i];
    return acc;
  };
  const Tensord fd = oracle::finite_difference(loss, input);
  CHECK(oracle::max_rel_error(fd, gi) < 1e-4);
}

TEST_CASE("softmax2 and sigmoid maps") {
  SUBCASE("equal logits give 0.5 everywhere") {
    Tensord logits({2, 2, 2});
    logits.array().setConstant(1.3);
    const auto m = softmax2_map(logits);
    for (Eigen::Index i = 0; i < m.size(); ++i) CHECK(m.data()[i] == doctest::Approx(0.5));
  }
  SUBCASE("large logit difference saturates toward 1") {
    Tensord logits({2, 1, 1});
    logits(0, 0, 0) = -40.0;
    logits(1, 0, 0) = 40.0;
    CHECK(softmax2_map(logits)(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("random logits match the closed form and channels sum to 1") {
    Rng rng(14);
    Tensord logits = oracle::random_tensor<double>({2, 4, 4}, rng, -30, 30);
    const Tensord probs = softmax2(logits);
    for (Eigen::Index y = 0; y < 4; ++y)
      for (Eigen::Index x = 0; x < 4; ++x) {
        const double e0 = std::exp(logits(0, y, x)), e1 = std::exp(logits(1, y, x));
        CHECK(probs(1, y, x) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
        CHECK(std::abs(probs(0, y, x) + probs(1, y, x) - 1.0) <= 1e-12);
      }
  }
  SUBCASE("sigmoid map") {
    Tensord logits({1, 1, 2});
    logits[0] = 0.0;
    logits[1] = -100.0;
    const auto m = sigmoid_map(logits);
    CHECK(m(0, 0) == doctest::Approx(0.5));
    CHECK(m(0, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("softmax cross-entropy loss") {
  SUBCASE("perfect prediction drives loss to zero") {
    Tensord logits({2, 2, 2});
    Map2<double> target(2, 2);
    target << 1, 0, 0, 1;
    for (Eigen::Index y = 0; y < 2; ++y)
      for (Eigen::Index x = 0; x < 2; ++x) {
        logits(0, y, x) = target(y, x) > 0.5 ? -50.0 : 50.0;
        logits(1, y, x) = target(y, x) > 0.5 ? 50.0 : -50.0;
      }
    CHECK(softmax_xent_loss(logits, target).loss == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("uniform prediction costs ln 2 per pixel") {
    Tensord logits({2, 3, 3});
    Map2<double> target = Map2<double>::Zero(3, 3);
    CHECK(softmax_xent_loss(logits, target).loss == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(15);
    Tensord logits = oracle::random_tensor<double>({2, 3, 3}, rng, -2, 2);
    Map2<double> target(3, 3);
    for (Eigen::Index i = 0; i < target.size(); ++i)
      target.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const auto r = softmax_xent_loss(logits, target);
    auto loss = [&]() { return softmax_xent_loss(logits, target).loss; };
    const Tensord fd = oracle::finite_difference(loss, logits);
    CHECK(oracle::max_rel_error(fd, r.grad) < 1e-4);
  }
}

TEST_CASE("binary cross-entropy with soft targets") {
  SUBCASE("perfect prediction") {
    Tensord logits({1, 1, 2});
    logits[0] = 60.0;
    logits[1] = -60.0;
    Map2<double> target(1, 2);
    target << 1, 0;
    CHECK(bce_loss(logits, target).loss == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("gradient matches finite differences on soft targets") {
    Rng rng(16);
    Tensord logits = oracle::random_tensor<double>({1, 3, 3}, rng, -2, 2);
    Map2<double> target(3, 3);
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform();
    const auto r = bce_loss(logits, target);
    auto loss = [&]() { return bce_loss(logits, target).loss; };
    const Tensord fd = oracle::finite_difference(loss, logits);
    CHECK(oracle::max_rel_error(fd, r.grad) < 1e-4);
  }
}

TEST_CASE("sgd momentum step") {
  Tensord p({2}), g({2}), v({2});
  p[0] = 1.0;
  p[1] = -2.0;

  SUBCASE("zero gradient and velocity leave parameters unchanged") {
    sgd_momentum_step(p, g, v, 0.1, 0.9);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
  }
  SUBCASE("first step from rest is p - lr*g") {
    g[0] = 0.5;
    g[1] = -1.0;
    sgd_momentum_step(p, g, v, 0.1, 0.9);
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.1));
  }
  SUBCASE("two steps match the hand-unrolled recurrence") {
    g[0] = 0.5;
    sgd_momentum_step(p, g, v, 0.1, 0.9);
    sgd_momentum_step(p, g, v, 0.1, 0.9);
    // v1 = -0.05, p1 = 0.95; v2 = 0.9*(-0.05) - 0.05 = -0.095, p2 = 0.855.
    CHECK(v[0] == doctest::Approx(-0.095));
    CHECK(p[0] == doctest::Approx(0.855));
  }
}

TEST_CASE("forward determinism: identical runs are bit-identical") {
  Rng rng(17);
  Tensorf input = oracle::random_tensor<float>({2, 8, 8}, rng);
  Tensorf w = oracle::random_tensor<float>({3, 2, 3, 3}, rng);
  Tensorf b = oracle::random_tensor<float>({3}, rng);
  ConvSpec spec{3, 3, 1, 1, 1, 2, 3};
  const Tensorf out1 = conv2d_forward(input, w, b, spec);
  const Tensorf out2 = conv2d_forward(input, w, b, spec);
  for (Eigen::Index i = 0; i < out1.size(); ++i) CHECK(out1[i] == out2[i]);
}
