#include <filesystem>
#include <random>

#include "doctest.h"
#include "sdfgen/nn/adam.hpp"
#include "sdfgen/nn/checkpoint.hpp"
#include "support.hpp"

using namespace sdfgen;
using namespace sdfgen::nn;

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

TEST_CASE("conv3d agrees with the seven-loop definition") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = 2 * pick(rng, 0, 2) + 1, stride = pick(rng, 1, 2), pad = pick(rng, 0, k / 2);
    const std::size_t n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
    const std::size_t d = pick(rng, k, k + 4), h = pick(rng, k, k + 4), w = pick(rng, k, k + 4);
    const Tensor x = support::random_tensor({n, ci, d, h, w}, rng);
    const Tensor wt = support::random_tensor({co, ci, k, k, k}, rng);
    const Tensor b = support::random_tensor({co}, rng);
    Tape tape(GradMode::disabled);
    const Tensor& fast =
        tape.value(conv3d(tape, tape.constant(x), tape.constant(wt), tape.constant(b), {k, stride, pad, 0}));
    const Tensor slow = support::naive_conv3d(x, wt, b, stride, pad);
    REQUIRE(fast.shape() == slow.shape());
    for (std::size_t i = 0; i < slow.numel(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
  }
}

TEST_CASE("upconv3d agrees with zero-stuffing") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = 2 * pick(rng, 1, 2) + 1, stride = pick(rng, 1, 2), pad = pick(rng, 0, k / 2);
    const std::size_t op = pick(rng, 0, stride - 1);
    const std::size_t n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
    const std::size_t d = pick(rng, 2, 4), h = pick(rng, 2, 4), w = pick(rng, 2, 4);
    const Tensor x = support::random_tensor({n, ci, d, h, w}, rng);
    const Tensor wt = support::random_tensor({ci, co, k, k, k}, rng);
    const Tensor b = support::random_tensor({co}, rng);
    Tape tape(GradMode::disabled);
    const Tensor& fast =
        tape.value(upconv3d(tape, tape.constant(x), tape.constant(wt), tape.constant(b), {k, stride, pad, op}));
    const Tensor slow = support::zero_stuff_upconv3d(x, wt, b, stride, pad, op);
    REQUIRE(fast.shape() == slow.shape());
    for (std::size_t i = 0; i < slow.numel(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
  }
}

TEST_CASE("doubling geometry doubles and halves") {
  const auto g = doubling_geometry(5);
  CHECK(upconv_output_size(4, g) == 8);
  CHECK(upconv_output_size(32, g) == 64);
  auto down = g;
  down.output_padding = 0;
  CHECK(conv_output_size(64, down) == 32);
}

TEST_CASE("upconv is the adjoint of conv") {
  std::mt19937_64 rng(3);
  const ConvGeometry g = doubling_geometry(5);
  const Tensor x = support::random_tensor({2, 3, 8, 8, 8}, rng);
  const Tensor y = support::random_tensor({2, 4, 4, 4, 4}, rng);
  const Tensor w = support::random_tensor({4, 3, 5, 5, 5}, rng);
  Tape tape(GradMode::disabled);
  const Tensor& cx = tape.value(conv3d(tape, tape.constant(x), tape.constant(w), tape.constant(Tensor({4})), g));
  const Tensor& uy = tape.value(upconv3d(tape, tape.constant(y), tape.constant(w), tape.constant(Tensor({3})), g));
  const double lhs = support::dot(cx, y), rhs = support::dot(x, uy);
  CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("finite-difference gradients of elementwise and structural ops") {
  std::mt19937_64 rng(4);
  auto shape = [&] { return Shape{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 3)}; };
  for (int trial = 0; trial < 5; ++trial) {
    const Shape s = shape();
    const Tensor a = support::random_tensor(s, rng), b = support::random_tensor(s, rng);
    const Tensor p = support::random_tensor(s, rng, 0.05, 0.95);
    auto one = [&](auto op) { return support::gradient_check([op](Tape& t, const std::vector<Var>& v) { return op(t, v[0]); }, {a}, 10 + trial); };
    CHECK(support::gradient_check([](Tape& t, const std::vector<Var>& v) { return add(t, v[0], v[1]); }, {a, b}, 1) < 1e-4);
    CHECK(support::gradient_check([](Tape& t, const std::vector<Var>& v) { return sub(t, v[0], v[1]); }, {a, b}, 2) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return affine(t, x, -1.7, 0.3); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return relu(t, x); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return leaky_relu(t, x, 0.2); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return nn::tanh(t, x); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return sigmoid(t, x); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return nn::abs(t, x); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return sum(t, x); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return mean(t, x); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return mean_per_sample(t, x); }) < 1e-4);
    CHECK(one([](Tape& t, Var x) { return reshape(t, x, {t.value(x).numel()}); }) < 1e-4);
    CHECK(support::gradient_check([](Tape& t, const std::vector<Var>& v) { return log_clamped(t, v[0], 1e-7); }, {p}, 3) < 1e-4);
  }
}

TEST_CASE("finite-difference gradients of linear, conv, upconv, batchnorm, concat") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t n = pick(rng, 1, 3), in = pick(rng, 1, 5), out = pick(rng, 1, 4);
    CHECK(support::gradient_check(
              [](Tape& t, const std::vector<Var>& v) { return linear(t, v[0], v[1], v[2]); },
              {support::random_tensor({n, in}, rng), support::random_tensor({out, in}, rng),
               support::random_tensor({out}, rng)},
              trial) < 1e-4);

    const std::size_t ci = pick(rng, 1, 2), co = pick(rng, 1, 2), k = 3, stride = pick(rng, 1, 2);
    const ConvGeometry g{k, stride, 1, stride - 1};
    CHECK(support::gradient_check(
              [g](Tape& t, const std::vector<Var>& v) { return conv3d(t, v[0], v[1], v[2], g); },
              {support::random_tensor({n, ci, 4, 5, 4}, rng), support::random_tensor({co, ci, k, k, k}, rng),
               support::random_tensor({co}, rng)},
              trial) < 1e-4);
    CHECK(support::gradient_check(
              [g](Tape& t, const std::vector<Var>& v) { return upconv3d(t, v[0], v[1], v[2], g); },
              {support::random_tensor({n, ci, 3, 2, 3}, rng), support::random_tensor({ci, co, k, k, k}, rng),
               support::random_tensor({co}, rng)},
              trial) < 1e-4);

    const std::size_t c = pick(rng, 1, 3);
    CHECK(support::gradient_check(
              [c](Tape& t, const std::vector<Var>& v) {
                BatchNormStats local{Tensor({c}), Tensor({c}, 1.0)};
                return batchnorm(t, v[0], v[1], v[2], local, {Mode::train, false});
              },
              {support::random_tensor({n + 1, c, 2, 3, 2}, rng), support::random_tensor({c}, rng),
               support::random_tensor({c}, rng)},
              trial) < 1e-4);
    CHECK(support::gradient_check(
              [](Tape& t, const std::vector<Var>& v) { return concat_channels(t, v[0], v[1]); },
              {support::random_tensor({n, 2, 2, 2, 2}, rng), support::random_tensor({n, 1, 2, 2, 2}, rng)},
              trial) < 1e-4);
  }
}

TEST_CASE("batchnorm statistics and running averages") {
  Tensor x({2, 1, 1, 1, 2}, {1.0, 2.0, 3.0, 6.0});  // mean 3, biased var 3.5, unbiased 14/3
  BatchNormStats stats{Tensor({1}), Tensor({1}, 1.0)};
  Tape tape(GradMode::disabled);
  Var g = tape.constant(Tensor({1}, 1.0)), b = tape.constant(Tensor({1}));
  const Tensor& y = tape.value(batchnorm(tape, tape.constant(x), g, b, stats, {}));
  CHECK(y[0] == doctest::Approx(-2.0 / std::sqrt(3.5 + 1e-5)));
  CHECK(stats.running_mean[0] == doctest::Approx(0.3));
  CHECK(stats.running_var[0] == doctest::Approx(0.9 + 0.1 * 14.0 / 3.0));
  const Tensor& e = tape.value(batchnorm(tape, tape.constant(x), g, b, stats, {Mode::eval}));
  CHECK(e[0] == doctest::Approx((1.0 - 0.3) / std::sqrt(stats.running_var[0] + 1e-5)));
  Tensor single({1, 1, 1, 1, 1});
  CHECK_THROWS_AS(batchnorm(tape, tape.constant(single), g, b, stats, {}), Error);
}

TEST_CASE("adam first step moves every parameter by the learning rate") {
  Parameter p("w", Tensor({3}, {1.0, -2.0, 0.5}));
  p.grad = Tensor({3}, {0.3, -4.0, 1e-3});
  AdamState state;
  state.config.lr = 0.1;
  std::vector<Parameter*> params{&p};
  adam_step(params, state);
  CHECK(p.value[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.value[1] == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(p.value[2] == doctest::Approx(0.4).epsilon(1e-4));
  // Second step by hand: m = 0.5 m + 0.5 g, v = 0.999 v + 0.001 g^2.
  p.grad = Tensor({3}, {0.3, -4.0, 1e-3});
  adam_step(params, state);
  CHECK(p.value[0] == doctest::Approx(0.8).epsilon(1e-6));
  Parameter q("q", Tensor({2}));
  std::vector<Parameter*> other{&q};
  CHECK_THROWS_AS(adam_step(other, state), Error);
}

TEST_CASE("tape misuse is reported") {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1.0, 2.0}));
  Var s = sum(tape, x);
  tape.backward(s);
  CHECK(tape.grad(x)[1] == 1.0);
  CHECK_THROWS_AS(tape.backward(s), Error);

  Tape t2;
  Var y = t2.leaf(Tensor({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(t2.backward(y), Error);
  CHECK_THROWS_AS(affine(t2, y, 1e308, 0.0) , Error);
  CHECK_THROWS_AS(leaky_relu(t2, y, 1.5), Error);
}

TEST_CASE("parameters accumulate gradients across uses") {
  std::mt19937_64 rng(6);
  Linear layer("fc", 3, 2, rng);
  Tape tape;
  Var x = tape.constant(Tensor({1, 3}, {1.0, 2.0, 3.0}));
  Var a = layer(tape, x);
  Var b = layer(tape, x);
  tape.backward(sum(tape, add(tape, a, b)));
  CHECK(layer.weight.grad[0] == doctest::Approx(2.0));
  CHECK(layer.bias.grad[1] == doctest::Approx(2.0));
}

TEST_CASE("checkpoint round trip and mismatch errors") {
  std::mt19937_64 rng(7);
  Conv3d conv("c", 2, 3, {3, 1, 1, 0}, rng);
  BatchNorm bn("bn", 3);
  ModuleState state;
  conv.collect(state);
  bn.collect(state);
  bn.stats.running_mean[1] = 0.25;
  const auto path = std::filesystem::temp_directory_path() / "sdfgen_test.ckpt";
  write_checkpoint(path, {{"note", "x"}}, state.tensors);
  const std::uint64_t before = checksum(state);

  std::mt19937_64 other(99);
  Conv3d conv2("c", 2, 3, {3, 1, 1, 0}, other);
  BatchNorm bn2("bn", 3);
  ModuleState state2;
  conv2.collect(state2);
  bn2.collect(state2);
  CHECK(checksum(state2) != before);
  const auto ck = read_checkpoint(path);
  CHECK(ck.header["note"] == "x");
  restore(ck, state2.tensors);
  CHECK(checksum(state2) == before);
  CHECK(bn2.stats.running_mean[1] == 0.25);

  ModuleState wrong;
  Conv3d conv3("c", 2, 4, {3, 1, 1, 0}, other);
  conv3.collect(wrong);
  CHECK_THROWS_AS(restore(ck, wrong.tensors), Error);

  auto bytes = encode_checkpoint({}, state.tensors);
  bytes.resize(bytes.size() - 8);
  CHECK_THROWS_AS(decode_checkpoint(bytes), Error);
  std::filesystem::remove(path);
}

TEST_CASE("initialization is deterministic in the seed") {
  std::mt19937_64 a(42), b(42);
  Conv3d ca("c", 2, 2, {5, 2, 2, 0}, a), cb("c", 2, 2, {5, 2, 2, 0}, b);
  CHECK(ca.weight.value.storage() == cb.weight.value.storage());
  double sq = 0.0;
  for (double v : ca.weight.value.data()) sq += v * v;
  CHECK(std::sqrt(sq / double(ca.weight.value.numel())) == doctest::Approx(kInitStd).epsilon(0.2));
  for (double v : ca.bias.value.data()) CHECK(v == 0.0);
}
