#include <doctest.h>

#include <cmath>

#include "adagtcn/errors.hpp"
#include "adagtcn/grad_check.hpp"
#include "adagtcn/ops.hpp"
#include "adagtcn/rng.hpp"
#include "adagtcn/tape.hpp"
#include "support/oracles.hpp"

using namespace adagtcn;

namespace {

// Scalar readout sum(out * weights) so gradient checks exercise every output
// element with distinct upstream values.
Var weighted_readout(Tape& tape, Var out, const Tensor& weights) {
  return ops::sum(ops::mul(out, tape.constant(weights)));
}

}  // namespace

TEST_CASE("matmul identity") {
  RngEngine rng(1);
  const Tensor m = oracles::random_tensor({2, 2}, rng);
  Tape tape;
  const Var out = ops::matmul(tape.constant(Tensor::identity(2)), tape.constant(m));
  CHECK(tape.value(out).max_abs_diff(m) == 0.0);
}

TEST_CASE("matmul hand example") {
  Tape tape;
  const Var a = tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  const Var b = tape.constant(Tensor::from_rows({{1}, {1}}));
  const Var out = ops::matmul(a, b);
  CHECK(tape.value(out) == Tensor::from_rows({{3}, {7}}));
}

TEST_CASE("matmul equals triple-loop oracle on random shapes") {
  RngEngine rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.uniform_index(8);
    const std::size_t k = 1 + rng.uniform_index(8);
    const std::size_t n = 1 + rng.uniform_index(8);
    const Tensor a = oracles::random_tensor({m, k}, rng);
    const Tensor b = oracles::random_tensor({k, n}, rng);
    Tape tape;
    const Var out = ops::matmul(tape.constant(a), tape.constant(b));
    CHECK(tape.value(out).max_abs_diff(oracles::matmul_naive(a, b)) < 1e-12);
  }
}

TEST_CASE("matmul shape error names both shapes") {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}));
  const Var b = tape.constant(Tensor({4, 5}));
  CHECK_THROWS_WITH_AS(ops::matmul(a, b), doctest::Contains("[2, 3]"), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  const Tensor b = Tensor::from_rows({{1}, {1}});
  const auto f = [](Tape& t, const std::vector<Var>& in) {
    return ops::sum(ops::matmul(in[0], in[1]));
  };
  const GradCheckReport report = check_gradients(f, {a, b}, 1e-5, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("elementwise trivial values") {
  Tape tape;
  CHECK(tape.value(ops::tanh(tape.constant(Tensor::scalar(0.0))))[0] == 0.0);
  CHECK(tape.value(ops::relu(tape.constant(Tensor::scalar(-1.5))))[0] == 0.0);
  CHECK(tape.value(ops::relu(tape.constant(Tensor::scalar(2.5))))[0] == 2.5);
}

TEST_CASE("tanh derivative at 0.5") {
  const auto f = [](Tape&, const std::vector<Var>& in) { return ops::sum(ops::tanh(in[0])); };
  Tape tape;
  const Var x = tape.leaf(Tensor::scalar(0.5));
  const Var y = ops::sum(ops::tanh(x));
  tape.backward(y);
  const double expected = 1.0 - std::tanh(0.5) * std::tanh(0.5);
  CHECK(tape.grad(x)[0] == doctest::Approx(0.786448).epsilon(1e-5));
  CHECK(tape.grad(x)[0] == doctest::Approx(expected).epsilon(1e-12));
  const GradCheckReport report = check_gradients(f, {Tensor::scalar(0.5)}, 1e-5, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("binary ops reject incompatible shapes") {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 2}));
  const Var b = tape.constant(Tensor({3}));
  CHECK_THROWS_AS(ops::add(a, b), ShapeError);
  CHECK_THROWS_AS(ops::mul(a, b), ShapeError);
}

TEST_CASE("scalar broadcasting works on either side") {
  Tape tape;
  const Var m = tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  const Var s = tape.constant(Tensor::scalar(10.0));
  CHECK(tape.value(ops::mul(m, s)) == Tensor::from_rows({{10, 20}, {30, 40}}));
  CHECK(tape.value(ops::sub(s, m)) == Tensor::from_rows({{9, 8}, {7, 6}}));
}

TEST_CASE("softmax symmetry and closed form") {
  Tape tape;
  const Var constant_in = tape.constant(Tensor::from_values({4.2, 4.2, 4.2}));
  const Tensor thirds = tape.value(ops::softmax(constant_in, 0));
  for (double v : thirds.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  const Var two = tape.constant(Tensor::from_values({0.0, std::log(3.0)}));
  const Tensor probs = tape.value(ops::softmax(two, 0));
  CHECK(probs[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and shift invariance") {
  RngEngine rng(11);
  const Tensor x = oracles::random_tensor({4, 5}, rng, 3.0);
  Tensor shifted = x;
  for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += 17.5;
  for (std::size_t axis : {0u, 1u}) {
    Tape tape;
    const Tensor a = tape.value(ops::softmax(tape.constant(x), axis));
    const Tensor b = tape.value(ops::softmax(tape.constant(shifted), axis));
    CHECK(a.max_abs_diff(b) < 1e-12);
    // every slice along the axis sums to 1
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    if (axis == 0) {
      for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += a.at(i, j);
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    } else {
      for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += a.at(i, j);
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("softmax jacobian matches finite differences") {
  RngEngine rng(13);
  const Tensor x = oracles::random_tensor({4}, rng);
  for (std::size_t component = 0; component < 4; ++component) {
    Tensor onehot({4});
    onehot[component] = 1.0;
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      return weighted_readout(t, ops::softmax(in[0], 0), onehot);
    };
    const GradCheckReport report = check_gradients(f, {x}, 1e-5, 1e-6);
    CHECK(report.pass);
  }
}

TEST_CASE("conv1d_dilated hand examples") {
  Tape tape;
  const Var x = tape.constant(Tensor({1, 4}, std::vector<double>{1, 2, 3, 4}));
  const Var f = tape.constant(Tensor({1, 1, 2}, std::vector<double>{1, 1}));
  CHECK(tape.value(ops::conv1d_dilated(x, f, 1)) ==
        Tensor({1, 3}, std::vector<double>{3, 5, 7}));

  const Var x5 = tape.constant(Tensor({1, 5}, std::vector<double>{1, 2, 3, 4, 5}));
  CHECK(tape.value(ops::conv1d_dilated(x5, f, 2)) ==
        Tensor({1, 3}, std::vector<double>{4, 6, 8}));
}

TEST_CASE("conv1d_dilated identity filter") {
  RngEngine rng(17);
  const Tensor x = oracles::random_tensor({1, 9}, rng);
  Tape tape;
  const Var f = tape.constant(Tensor({1, 1, 1}, std::vector<double>{1.0}));
  for (std::size_t r : {1u, 2u, 5u}) {
    const Var out = ops::conv1d_dilated(tape.constant(x), f, r);
    CHECK(tape.value(out).max_abs_diff(x) == 0.0);
  }
}

TEST_CASE("conv1d_dilated equals direct-sum oracle") {
  RngEngine rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t batch = 1 + rng.uniform_index(3);
    const std::size_t c_in = 1 + rng.uniform_index(3);
    const std::size_t c_out = 1 + rng.uniform_index(3);
    const std::size_t width = 1 + rng.uniform_index(3);
    const std::size_t dilation = 1 + rng.uniform_index(3);
    const std::size_t t_len = (width - 1) * dilation + 1 + rng.uniform_index(6);
    const Tensor x = oracles::random_tensor({batch, c_in, t_len}, rng);
    const Tensor f = oracles::random_tensor({c_out, c_in, width}, rng);
    Tape tape;
    const Var out = ops::conv1d_dilated_batched(tape.constant(x), tape.constant(f), dilation);
    CHECK(tape.value(out).max_abs_diff(oracles::conv1d_naive(x, f, dilation)) < 1e-12);
  }
}

TEST_CASE("conv1d_dilated length error reports required minimum") {
  Tape tape;
  const Var x = tape.constant(Tensor({1, 3}, std::vector<double>{1, 2, 3}));
  const Var f = tape.constant(Tensor({1, 1, 3}, std::vector<double>{1, 1, 1}));
  CHECK_THROWS_WITH_AS(ops::conv1d_dilated(x, f, 2), doctest::Contains("T >= 5"), LengthError);
}

TEST_CASE("conv1d_dilated gradients match finite differences") {
  RngEngine rng(23);
  const Tensor x = oracles::random_tensor({2, 3, 8}, rng);
  const Tensor f = oracles::random_tensor({2, 3, 2}, rng);
  const Tensor w = oracles::random_tensor({2, 2, 6}, rng);
  const auto check = [&](Tape& t, const std::vector<Var>& in) {
    return weighted_readout(t, ops::conv1d_dilated_batched(in[0], in[1], 2), w);
  };
  CHECK(check_gradients(check, {x, f}, 1e-5, 1e-6).pass);
}

TEST_CASE("reduction values") {
  Tape tape;
  CHECK(tape.value(ops::mean(tape.constant(Tensor::from_values({2, 4, 6}))))[0] == 4.0);
  const Var m = tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  CHECK(tape.value(ops::sum(m, 0)) == Tensor::from_values({4, 6}));
  CHECK(tape.value(ops::sum(m, 1)) == Tensor::from_values({3, 7}));
}

TEST_CASE("mean gradient is 1/len everywhere") {
  Tape tape;
  const Var x = tape.leaf(Tensor::from_values({2, 4, 6}));
  tape.backward(ops::mean(x));
  for (double g : tape.grad(x).data()) CHECK(g == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto f = [](Tape&, const std::vector<Var>& in) { return ops::mean(in[0]); };
  CHECK(check_gradients(f, {Tensor::from_values({2, 4, 6})}, 1e-5, 1e-8).pass);
}

TEST_CASE("max routes gradient to first argmax") {
  Tape tape;
  const Var x = tape.leaf(Tensor::from_values({1, 7, 7, 3}));
  tape.backward(ops::max(x));
  CHECK(tape.grad(x) == Tensor::from_values({0, 1, 0, 0}));
}

TEST_CASE("topk_mask row selection and tie-break") {
  Tape tape;
  const Tensor scores = Tensor::from_rows({{3, 1, 2}, {0, 5, 4}, {9, 8, 7}});
  CHECK(ops::topk_mask_values(scores, 1) ==
        Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {1, 0, 0}}));
  CHECK(ops::topk_mask_values(scores, 3) == Tensor({3, 3}, 1.0));
  CHECK(ops::topk_mask_values(Tensor::from_rows({{2, 2, 2}, {2, 2, 2}, {2, 2, 2}}), 1) ==
        Tensor::from_rows({{1, 0, 0}, {1, 0, 0}, {1, 0, 0}}));
  CHECK_THROWS_AS(ops::topk_mask_values(scores, 4), ConfigError);
}

TEST_CASE("topk_mask rows sum to k and idempotence on masked scores") {
  RngEngine rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 2 + rng.uniform_index(7);
    const std::size_t k = 1 + rng.uniform_index(p);
    const Tensor scores = oracles::random_uniform_tensor({p, p}, rng, 0.1, 1.0);
    const Tensor mask = ops::topk_mask_values(scores, k);
    for (std::size_t i = 0; i < p; ++i) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < p; ++j) row_sum += mask.at(i, j);
      CHECK(row_sum == static_cast<double>(k));
    }
    Tensor masked = scores;
    for (std::size_t i = 0; i < masked.numel(); ++i) masked[i] *= mask[i];
    CHECK(ops::topk_mask_values(masked, k) == mask);
  }
}

TEST_CASE("topk_mask straight-through backward") {
  Tape tape;
  const Var scores = tape.leaf(Tensor::from_rows({{3, 1, 2}, {0, 5, 4}, {9, 8, 7}}));
  const Var mask = ops::topk_mask(scores, 1);
  const Tensor upstream = Tensor::from_rows({{10, 20, 30}, {40, 50, 60}, {70, 80, 90}});
  tape.backward(weighted_readout(tape, mask, upstream));
  CHECK(tape.grad(scores) == Tensor::from_rows({{10, 0, 0}, {0, 50, 0}, {70, 0, 0}}));
}

TEST_CASE("layer_norm hand values") {
  Tape tape;
  const Var gain = tape.constant(Tensor({2}, 1.0));
  const Var bias = tape.constant(Tensor({2}, 0.0));

  const Var constant_row = tape.constant(Tensor::from_rows({{5, 5}}));
  const Tensor zeroed = tape.value(ops::layer_norm(constant_row, gain, bias));
  CHECK(zeroed.max_abs() < 1e-9);

  const Var row = tape.constant(Tensor::from_rows({{1, 3}}));
  const Tensor normed = tape.value(ops::layer_norm(row, gain, bias));
  CHECK(normed.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(normed.at(0, 1) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm statistics on random input") {
  RngEngine rng(31);
  // input variance well above the 1e-5 epsilon so the normalized variance
  // lands within 1e-6 of 1
  const Tensor x = oracles::random_tensor({5, 16}, rng, 6.0);
  Tape tape;
  const Var gain = tape.constant(Tensor({16}, 1.0));
  const Var bias = tape.constant(Tensor({16}, 0.0));
  const Tensor out = tape.value(ops::layer_norm(tape.constant(x), gain, bias));
  for (std::size_t r = 0; r < 5; ++r) {
    double mu = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 16; ++c) mu += out.at(r, c);
    mu /= 16.0;
    for (std::size_t c = 0; c < 16; ++c) var += (out.at(r, c) - mu) * (out.at(r, c) - mu);
    var /= 16.0;
    CHECK(std::abs(mu) < 1e-10);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("per-op gradients match finite differences on random small shapes") {
  RngEngine rng(37);
  const double eps = 1e-5;
  const double tol = 1e-4;

  SUBCASE("unary chain") {
    const Tensor x = oracles::random_tensor({3, 4}, rng);
    const Tensor w = oracles::random_tensor({3, 4}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      const Var h = ops::sigmoid(ops::tanh(ops::scale(in[0], 0.7)));
      return weighted_readout(t, h, w);
    };
    CHECK(check_gradients(f, {x}, eps, tol).pass);
  }

  SUBCASE("relu away from kink") {
    Tensor x = oracles::random_tensor({4, 4}, rng);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (std::abs(x[i]) < 0.05) x[i] = 0.1;  // keep FD away from the subgradient point
    }
    const Tensor w = oracles::random_tensor({4, 4}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      return weighted_readout(t, ops::relu(in[0]), w);
    };
    CHECK(check_gradients(f, {x}, eps, tol).pass);
  }

  SUBCASE("exp log rsqrt on positive inputs") {
    const Tensor x = oracles::random_uniform_tensor({3, 3}, rng, 0.5, 2.0);
    const Tensor w = oracles::random_tensor({3, 3}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      const Var h = ops::exp(ops::scale(ops::log(ops::rsqrt(in[0])), 0.5));
      return weighted_readout(t, h, w);
    };
    CHECK(check_gradients(f, {x}, eps, tol).pass);
  }

  SUBCASE("binary ops with scalar broadcast") {
    const Tensor a = oracles::random_tensor({2, 5}, rng);
    const Tensor b = oracles::random_tensor({2, 5}, rng);
    const Tensor s = Tensor::scalar(0.8);
    const Tensor w = oracles::random_tensor({2, 5}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      const Var h = ops::mul(ops::add(in[0], in[2]), ops::sub(in[1], in[2]));
      return weighted_readout(t, h, w);
    };
    CHECK(check_gradients(f, {a, b, s}, eps, tol).pass);
  }

  SUBCASE("emax") {
    const Tensor a = oracles::random_tensor({3, 3}, rng);
    Tensor b = oracles::random_tensor({3, 3}, rng);
    for (std::size_t i = 0; i < b.numel(); ++i) {
      if (std::abs(a[i] - b[i]) < 0.05) b[i] += 0.2;  // avoid FD across the tie
    }
    const Tensor w = oracles::random_tensor({3, 3}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      return weighted_readout(t, ops::emax(in[0], in[1]), w);
    };
    CHECK(check_gradients(f, {a, b}, eps, tol).pass);
  }

  SUBCASE("shape ops") {
    const Tensor x = oracles::random_tensor({2, 3, 4}, rng);
    const Tensor w = oracles::random_tensor({8, 3}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      const Var swapped = ops::swap_last_axes(in[0]);       // [2, 4, 3]
      const Var flat = ops::reshape(swapped, {8, 3});
      const Var sliced = ops::narrow(flat, 0, 0, 8);
      return weighted_readout(t, sliced, w);
    };
    CHECK(check_gradients(f, {x}, eps, tol).pass);
  }

  SUBCASE("concat and narrow") {
    const Tensor a = oracles::random_tensor({2, 3}, rng);
    const Tensor b = oracles::random_tensor({2, 2}, rng);
    const Tensor w = oracles::random_tensor({2, 4}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      const Var cat = ops::concat({in[0], in[1]}, 1);       // [2, 5]
      const Var trimmed = ops::narrow(cat, 1, 1, 4);
      return weighted_readout(t, trimmed, w);
    };
    CHECK(check_gradients(f, {a, b}, eps, tol).pass);
  }

  SUBCASE("transpose and add_rowvec") {
    const Tensor x = oracles::random_tensor({3, 5}, rng);
    const Tensor b = oracles::random_tensor({3}, rng);
    const Tensor w = oracles::random_tensor({5, 3}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      return weighted_readout(t, ops::add_rowvec(ops::transpose(in[0]), in[1]), w);
    };
    CHECK(check_gradients(f, {x, b}, eps, tol).pass);
  }

  SUBCASE("axis reductions") {
    const Tensor x = oracles::random_tensor({4, 6}, rng);
    const Tensor w0 = oracles::random_tensor({6}, rng);
    const Tensor w1 = oracles::random_tensor({4}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      const Var s0 = weighted_readout(t, ops::sum(in[0], 0), w0);
      const Var s1 = weighted_readout(t, ops::mean(in[0], 1), w1);
      return ops::add(s0, s1);
    };
    CHECK(check_gradients(f, {x}, eps, tol).pass);
  }

  SUBCASE("layer_norm") {
    const Tensor x = oracles::random_tensor({3, 6}, rng);
    const Tensor gain = oracles::random_uniform_tensor({6}, rng, 0.5, 1.5);
    const Tensor bias = oracles::random_tensor({6}, rng, 0.3);
    const Tensor w = oracles::random_tensor({3, 6}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      return weighted_readout(t, ops::layer_norm(in[0], in[1], in[2]), w);
    };
    CHECK(check_gradients(f, {x, gain, bias}, eps, tol).pass);
  }

  SUBCASE("clamp interior") {
    const Tensor x = oracles::random_uniform_tensor({4}, rng, -0.4, 0.4);
    const Tensor w = oracles::random_tensor({4}, rng);
    const auto f = [&](Tape& t, const std::vector<Var>& in) {
      return weighted_readout(t, ops::clamp(in[0], -0.5, 0.5), w);
    };
    CHECK(check_gradients(f, {x}, eps, tol).pass);
  }
}

TEST_CASE("deterministic replay: same inputs give bit-identical forwards") {
  const auto run = [](std::uint64_t seed) {
    RngEngine rng(seed);
    const Tensor a = oracles::random_tensor({4, 4}, rng);
    const Tensor b = oracles::random_tensor({4, 4}, rng);
    Tape tape;
    const Var out =
        ops::softmax(ops::tanh(ops::matmul(tape.constant(a), tape.constant(b))), 1);
    return tape.value(out);
  };
  CHECK(run(99) == run(99));
}
