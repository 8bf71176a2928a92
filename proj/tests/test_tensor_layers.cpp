#include <cstring>

#include "doctest.h"
#include "prunekit/layers.hpp"
#include "prunekit/optimizer.hpp"
#include "prunekit/tensor.hpp"
#include "testutil.hpp"

using namespace prunekit;
using testutil::fd_layer_max_rel_error;
using testutil::random_tensor;

TEST_CASE("tensor shape/data invariant is enforced") {
  CHECK_NOTHROW(Tensor<float>({2, 3}, std::vector<float>(6, 0.f)));
  CHECK_THROWS_AS(Tensor<float>({2, 3}, std::vector<float>(5, 0.f)), Error);
  Tensor<float> t({2, 2});
  CHECK(t.size() == 4);
  CHECK_FALSE(t.has_grad());
  t.ensure_grad();
  CHECK(t.grad.size() == 4);
}

TEST_CASE("conv with all-zero weights maps any input to zero") {
  auto conv = make_conv<double>(3, 2, 3, 3);
  Rng rng(5);
  Tensor<double> in = random_tensor({2, 2, 5, 5}, rng);
  Tensor<double> out = layer_apply(conv, in);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("1x1 identity conv reproduces its input") {
  auto conv = make_conv<double>(2, 2, 1, 1);
  conv.weights.data = {1.0, 0.0,   // filter 0 reads channel 0
                       0.0, 1.0};  // filter 1 reads channel 1
  Rng rng(7);
  Tensor<double> in = random_tensor({1, 2, 4, 4}, rng);
  Tensor<double> out = layer_apply(conv, in);
  REQUIRE(out.shape == in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(out.data[i] == in.data[i]);
}

TEST_CASE("3x3 ones conv on 4x4 ones input: center 9, corner 4, edge 6") {
  auto conv = make_conv<double>(1, 1, 3, 3);
  conv.weights.data.assign(9, 1.0);
  Tensor<double> in({1, 1, 4, 4}, std::vector<double>(16, 1.0));
  Tensor<double> out = layer_apply(conv, in);
  auto at = [&](std::size_t y, std::size_t x) { return out.data[y * 4 + x]; };
  CHECK(at(1, 1) == 9.0);
  CHECK(at(1, 2) == 9.0);
  CHECK(at(2, 2) == 9.0);
  CHECK(at(0, 0) == 4.0);
  CHECK(at(0, 3) == 4.0);
  CHECK(at(3, 3) == 4.0);
  CHECK(at(0, 1) == 6.0);
  CHECK(at(1, 0) == 6.0);
}

TEST_CASE("conv shape mismatch names the layer and shapes") {
  auto conv = make_conv<double>(2, 3, 3, 3);
  Tensor<double> in({1, 2, 4, 4});
  CHECK_THROWS_WITH_AS(layer_apply(conv, in),
                       doctest::Contains("conv2d"), Error);
}

TEST_CASE("zero upstream grad yields zero input and weight grads") {
  auto conv = make_conv<double>(2, 2, 3, 3);
  Rng rng(11);
  for (auto& w : conv.weights.data) w = rng.uniform(-1, 1);
  Tensor<double> in = random_tensor({1, 2, 4, 4}, rng);
  Tensor<double> up({1, 2, 4, 4});
  LayerGrads<double> g = layer_backprop(conv, in, up);
  for (double v : g.input_grad.data) CHECK(v == 0.0);
  for (double v : g.weight_grad.data) CHECK(v == 0.0);
  for (double v : g.bias_grad.data) CHECK(v == 0.0);
}

TEST_CASE("relu blocks gradient at negative pre-activations") {
  auto relu = make_plain<double>(LayerKind::relu);
  Tensor<double> in({1, 4}, {-2.0, -0.5, 0.5, 3.0});
  Tensor<double> up({1, 4}, {1.0, 1.0, 1.0, 1.0});
  LayerGrads<double> g = layer_backprop(relu, in, up);
  CHECK(g.input_grad.data[0] == 0.0);
  CHECK(g.input_grad.data[1] == 0.0);
  CHECK(g.input_grad.data[2] == 1.0);
  CHECK(g.input_grad.data[3] == 1.0);
}

TEST_CASE("relu output is never negative") {
  Rng rng(23);
  auto relu = make_plain<double>(LayerKind::relu);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> in = random_tensor({2, 3, 4, 4}, rng, -5.0, 5.0);
    Tensor<double> out = layer_apply(relu, in);
    for (double v : out.data) CHECK(v >= 0.0);
  }
}

TEST_CASE("layer gradients agree with finite differences") {
  Rng rng(42);

  SUBCASE("conv2d") {
    auto conv = make_conv<double>(3, 2, 3, 3);
    for (auto& w : conv.weights.data) w = rng.uniform(-1, 1);
    for (auto& b : conv.bias.data) b = rng.uniform(-1, 1);
    Tensor<double> in = random_tensor({2, 2, 5, 5}, rng);
    CHECK(fd_layer_max_rel_error(conv, in, rng) < 1e-4);
  }
  SUBCASE("conv2d 1x1") {
    auto conv = make_conv<double>(4, 3, 1, 1);
    for (auto& w : conv.weights.data) w = rng.uniform(-1, 1);
    Tensor<double> in = random_tensor({1, 3, 4, 4}, rng);
    CHECK(fd_layer_max_rel_error(conv, in, rng) < 1e-4);
  }
  SUBCASE("dense") {
    auto fc = make_dense<double>(5, 12);
    for (auto& w : fc.weights.data) w = rng.uniform(-1, 1);
    for (auto& b : fc.bias.data) b = rng.uniform(-1, 1);
    Tensor<double> in = random_tensor({3, 12}, rng);
    CHECK(fd_layer_max_rel_error(fc, in, rng) < 1e-4);
  }
  SUBCASE("maxpool") {
    auto pool = make_plain<double>(LayerKind::maxpool2x2);
    Tensor<double> in = random_tensor({2, 2, 6, 6}, rng);
    CHECK(fd_layer_max_rel_error(pool, in, rng) < 1e-4);
  }
  SUBCASE("softmax") {
    auto sm = make_plain<double>(LayerKind::softmax_xent);
    Tensor<double> in = random_tensor({3, 7}, rng, -2.0, 2.0);
    CHECK(fd_layer_max_rel_error(sm, in, rng) < 1e-4);
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(9);
  auto sm = make_plain<double>(LayerKind::softmax_xent);
  Tensor<double> in = random_tensor({4, 6}, rng, -10.0, 10.0);
  Tensor<double> out = layer_apply(sm, in);
  for (std::size_t b = 0; b < 4; ++b) {
    double s = 0;
    for (std::size_t c = 0; c < 6; ++c) s += out.data[b * 6 + c];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("forward pass is bit-deterministic") {
  Rng rng(31);
  auto conv = make_conv<float>(4, 3, 3, 3);
  for (auto& w : conv.weights.data) w = static_cast<float>(rng.uniform(-1, 1));
  Tensor<float> in({2, 3, 8, 8});
  for (auto& v : in.data) v = static_cast<float>(rng.uniform(-1, 1));
  Tensor<float> a = layer_apply(conv, in);
  Tensor<float> b = layer_apply(conv, in);
  CHECK(std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("non-finite forward output raises a numeric error") {
  auto fc = make_dense<double>(2, 2);
  fc.weights.data = {1e308, 1e308, 1e308, 1e308};
  Tensor<double> in({1, 2}, {1e308, 1e308});
  CHECK_THROWS_AS(layer_apply(fc, in), Error);
}

TEST_CASE("sgd_step: lr 0 leaves parameters unchanged") {
  auto fc = make_dense<double>(2, 2);
  fc.weights.data = {1, 2, 3, 4};
  fc.weights.grad = {10, 10, 10, 10};
  fc.bias.grad = {1, 1};
  Velocity<double> vel;
  sgd_step(fc, vel, 0.0, 0.9);
  CHECK(fc.weights.data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("sgd_step: plain step is w - lr * grad") {
  auto fc = make_dense<double>(1, 2);
  fc.weights.data = {1.0, -1.0};
  fc.weights.grad = {0.5, 0.25};
  fc.bias.data = {2.0};
  fc.bias.grad = {1.0};
  Velocity<double> vel;
  sgd_step(fc, vel, 0.1, 0.0);
  CHECK(fc.weights.data[0] == doctest::Approx(1.0 - 0.05).epsilon(1e-15));
  CHECK(fc.weights.data[1] == doctest::Approx(-1.0 - 0.025).epsilon(1e-15));
  CHECK(fc.bias.data[0] == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("sgd_step: two momentum steps with constant grad move lr*g*(1+1.9)") {
  // v1 = g, v2 = 0.9 g + g = 1.9 g, total = lr*g*(1 + 1.9)
  auto fc = make_dense<double>(1, 1);
  fc.weights.data = {0.0};
  fc.bias.data = {0.0};
  Velocity<double> vel;
  const double g = 2.0, lr = 0.1;
  for (int step = 0; step < 2; ++step) {
    fc.weights.grad = {g};
    fc.bias.grad = {0.0};
    sgd_step(fc, vel, lr, 0.9);
  }
  CHECK(fc.weights.data[0] == doctest::Approx(-lr * g * 2.9).epsilon(1e-12));
}

TEST_CASE("sgd_step rejects non-finite gradients") {
  auto fc = make_dense<double>(1, 1);
  fc.weights.grad = {std::numeric_limits<double>::quiet_NaN()};
  fc.bias.grad = {0.0};
  Velocity<double> vel;
  CHECK_THROWS_AS(sgd_step(fc, vel, 0.1, 0.0), Error);
}
