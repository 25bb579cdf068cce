#include <doctest.h>

#include <cmath>

#include "adagtcn/errors.hpp"
#include "adagtcn/gconv.hpp"
#include "adagtcn/grad_check.hpp"
#include "adagtcn/ops.hpp"
#include "support/oracles.hpp"

using namespace adagtcn;

namespace {

DnGcnConfig identity_reduction_config() {
  DnGcnConfig cfg;
  cfg.depth = 1;
  cfg.beta = {1.0};
  return cfg;
}

Tensor normalize_oracle_free(const Tensor& a) {
  Tape tape;
  return tape.value(normalize_adjacency(tape.constant(a)));
}

}  // namespace

TEST_CASE("normalize_adjacency of the zero matrix is the identity") {
  CHECK(normalize_oracle_free(Tensor({3, 3})).max_abs_diff(Tensor::identity(3)) == 0.0);
}

TEST_CASE("normalize_adjacency two-node hand case") {
  const Tensor a = Tensor::from_rows({{0, 1}, {1, 0}});
  const Tensor expected = Tensor::from_rows({{0.5, 0.5}, {0.5, 0.5}});
  CHECK(normalize_oracle_free(a).max_abs_diff(expected) < 1e-15);
}

TEST_CASE("normalize_adjacency three-node hand case") {
  // path graph 0-1-2: degrees with self-loops are 2, 3, 2
  const Tensor a = Tensor::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  const Tensor ahat = normalize_oracle_free(a);
  CHECK(ahat.at(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(ahat.at(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-14));
  CHECK(ahat.at(0, 2) == 0.0);
  CHECK(ahat.at(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("normalize_adjacency symmetry for symmetric input") {
  RngEngine rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a({5, 5});
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = i + 1; j < 5; ++j) {
        const double v = rng.uniform(0.0, 2.0);
        a.at(i, j) = v;
        a.at(j, i) = v;
      }
    }
    const Tensor ahat = normalize_oracle_free(a);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(std::abs(ahat.at(i, j) - ahat.at(j, i)) < 1e-12);
      }
    }
  }
}

TEST_CASE("normalize_adjacency spectral radius stays within 1") {
  RngEngine rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a({6, 6});
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = i + 1; j < 6; ++j) {
        const double v = rng.uniform() < 0.4 ? rng.uniform(0.0, 3.0) : 0.0;
        a.at(i, j) = v;
        a.at(j, i) = v;
      }
    }
    CHECK(oracles::spectral_radius(normalize_oracle_free(a)) <= 1.0 + 1e-9);
  }
}

TEST_CASE("normalize_adjacency symmetrizes directed input by elementwise max") {
  Tensor directed({2, 2});
  directed.at(0, 1) = 0.8;  // one-way edge
  const Tensor ahat = normalize_oracle_free(directed);
  // max-symmetrized to 0.8 both ways, degrees 1.8
  CHECK(ahat.at(0, 1) == doctest::Approx(0.8 / 1.8).epsilon(1e-14));
  CHECK(ahat.at(1, 0) == doctest::Approx(0.8 / 1.8).epsilon(1e-14));
}

TEST_CASE("normalize_adjacency gradient matches finite differences") {
  RngEngine rng(55);
  const Tensor a = oracles::random_uniform_tensor({4, 4}, rng, 0.0, 2.0);
  const Tensor w = oracles::random_tensor({4, 4}, rng);
  const auto f = [&](Tape& t, const std::vector<Var>& in) {
    return ops::sum(ops::mul(normalize_adjacency(in[0]), t.constant(w)));
  };
  CHECK(check_gradients(f, {a}, 1e-5, 1e-4).pass);
}

TEST_CASE("vanilla_gcn hand cases") {
  Tape tape;
  {
    const Var h = tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
    const Var out = vanilla_gcn(h, tape.constant(Tensor::identity(2)),
                                tape.constant(Tensor::identity(2)));
    CHECK(tape.value(out) == Tensor::from_rows({{1, 2}, {3, 4}}));
  }
  {
    const Var h = tape.constant(Tensor::from_rows({{1}, {3}}));
    const Var ahat = tape.constant(Tensor::from_rows({{0.5, 0.5}, {0.5, 0.5}}));
    const Var w = tape.constant(Tensor::from_rows({{1}}));
    CHECK(tape.value(vanilla_gcn(h, ahat, w)) == Tensor::from_rows({{2}, {2}}));
  }
  {
    const Var h = tape.constant(Tensor({2, 3}));
    const Var out = vanilla_gcn(h, tape.constant(Tensor::identity(2)),
                                tape.constant(Tensor({3, 2}, 0.7)));
    CHECK(tape.value(out).max_abs() == 0.0);
  }
}

TEST_CASE("dn_gcn with depth 1 reduces exactly to vanilla_gcn") {
  RngEngine rng(57);
  for (int trial = 0; trial < 20; ++trial) {
    DnGcnLayer layer("gcn", 3, 3, identity_reduction_config(), rng);
    ParamRegistry registry;
    layer.register_params(registry);

    Tensor a({4, 4});
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) {
        const double v = rng.uniform(0.0, 1.0);
        a.at(i, j) = v;
        a.at(j, i) = v;
      }
    }
    const Tensor h = oracles::random_tensor({4, 3}, rng);

    Tape tape;
    StagedParams staged(tape, registry);
    const Var ahat = normalize_adjacency(tape.constant(a));
    const Var deep = layer.forward2d(staged, tape.constant(h), ahat);
    const Var plain =
        vanilla_gcn(tape.constant(h), ahat, tape.constant(layer.weights()[0]));
    CHECK(tape.value(deep).max_abs_diff(tape.value(plain)) < 1e-12);
  }
}

TEST_CASE("dn_gcn two-hop-only configuration matches chained matrix oracle") {
  RngEngine rng(59);
  DnGcnConfig cfg;
  cfg.depth = 2;
  cfg.beta = {1.0, 1.0};  // beta_1 irrelevant: depth-1 selector is zero
  cfg.selectors = {std::vector<std::uint8_t>(2, 0), std::vector<std::uint8_t>(2, 1)};
  DnGcnLayer layer("gcn", 2, 2, cfg, rng);
  ParamRegistry registry;
  layer.register_params(registry);

  const Tensor a = Tensor::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  const Tensor h = oracles::random_tensor({3, 2}, rng);

  Tape tape;
  StagedParams staged(tape, registry);
  const Var ahat = normalize_adjacency(tape.constant(a));
  const Tensor got = tape.value(layer.forward2d(staged, tape.constant(h), ahat));

  // hand-chained: relu(Ahat (Ahat H W1) W2)
  const Tensor ahat_v = tape.value(ahat);
  const Tensor inner = oracles::matmul_naive(oracles::matmul_naive(ahat_v, h), layer.weights()[0]);
  Tensor expected =
      oracles::matmul_naive(oracles::matmul_naive(ahat_v, inner), layer.weights()[1]);
  for (std::size_t i = 0; i < expected.numel(); ++i) expected[i] = std::max(expected[i], 0.0);
  CHECK(got.max_abs_diff(expected) < 1e-12);
}

TEST_CASE("dn_gcn zero betas give zero output") {
  RngEngine rng(61);
  DnGcnConfig cfg;
  cfg.depth = 2;
  cfg.beta = {0.0, 0.0};
  DnGcnLayer layer("gcn", 2, 2, cfg, rng);
  ParamRegistry registry;
  layer.register_params(registry);
  Tape tape;
  StagedParams staged(tape, registry);
  const Var ahat = tape.constant(Tensor::identity(3));
  const Var h = tape.constant(oracles::random_tensor({3, 2}, rng));
  CHECK(tape.value(layer.forward2d(staged, h, ahat)).max_abs() == 0.0);
}

TEST_CASE("dn_gcn validates beta count and final selector") {
  RngEngine rng(63);
  DnGcnConfig bad_beta;
  bad_beta.depth = 2;
  bad_beta.beta = {1.0};
  CHECK_THROWS_AS(DnGcnLayer("g", 2, 2, bad_beta, rng), ConfigError);

  DnGcnConfig zero_last;
  zero_last.depth = 2;
  zero_last.beta = {0.5, 0.6};
  zero_last.selectors = {std::vector<std::uint8_t>(2, 1), std::vector<std::uint8_t>(2, 0)};
  CHECK_THROWS_AS(DnGcnLayer("g", 2, 2, zero_last, rng), ConfigError);
}

TEST_CASE("dn_gcn gradient matches finite differences") {
  RngEngine rng(65);
  DnGcnConfig cfg;
  cfg.depth = 2;
  cfg.beta = {0.5, 0.6};
  DnGcnLayer layer("gcn", 3, 3, cfg, rng);
  ParamRegistry registry;
  layer.register_params(registry);

  const Tensor a = oracles::random_uniform_tensor({4, 4}, rng, 0.0, 1.0);
  const Tensor h = oracles::random_tensor({4, 3}, rng);
  const Tensor readout = oracles::random_tensor({4, 3}, rng);

  std::vector<Tensor> inputs = {a, h};
  for (const ParamRef& ref : registry.refs()) inputs.push_back(*ref.tensor);

  const auto f = [&](Tape& tape, const std::vector<Var>& leaves) {
    StagedParams staged(tape, std::vector<Var>(leaves.begin() + 2, leaves.end()));
    const Var ahat = normalize_adjacency(leaves[0]);
    const Var out = layer.forward2d(staged, leaves[1], ahat);
    return ops::sum(ops::mul(out, tape.constant(readout)));
  };
  const GradCheckReport report = check_gradients(f, inputs, 1e-5, 1e-4);
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.pass);
}

TEST_CASE("dn_gcn is permutation equivariant") {
  RngEngine rng(67);
  DnGcnConfig cfg;
  cfg.depth = 2;
  cfg.beta = {0.5, 0.6};
  DnGcnLayer layer("gcn", 3, 4, cfg, rng);
  ParamRegistry registry;
  layer.register_params(registry);

  const std::size_t p = 5;
  const Tensor a = oracles::random_uniform_tensor({p, p}, rng, 0.0, 1.0);
  const Tensor h = oracles::random_tensor({p, 3}, rng);
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};

  Tensor pa({p, p}), ph({p, 3});
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) pa.at(i, j) = a.at(perm[i], perm[j]);
    for (std::size_t c = 0; c < 3; ++c) ph.at(i, c) = h.at(perm[i], c);
  }

  const auto run = [&](const Tensor& adj, const Tensor& feats) {
    Tape tape;
    StagedParams staged(tape, registry);
    const Var ahat = normalize_adjacency(tape.constant(adj));
    return tape.value(layer.forward2d(staged, tape.constant(feats), ahat));
  };
  const Tensor base = run(a, h);
  const Tensor permuted = run(pa, ph);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(std::abs(permuted.at(i, c) - base.at(perm[i], c)) < 1e-10);
    }
  }
}

TEST_CASE("dn_gcn 3-D state path agrees with per-timestep 2-D calls") {
  RngEngine rng(69);
  DnGcnConfig cfg;
  cfg.depth = 2;
  cfg.beta = {0.5, 0.6};
  DnGcnLayer layer("gcn", 2, 3, cfg, rng);
  ParamRegistry registry;
  layer.register_params(registry);

  const std::size_t p = 4, c_in = 2, t_len = 5;
  const Tensor a = oracles::random_uniform_tensor({p, p}, rng, 0.0, 1.0);
  const Tensor x = oracles::random_tensor({p, c_in, t_len}, rng);

  Tape tape;
  StagedParams staged(tape, registry);
  const Var ahat = normalize_adjacency(tape.constant(a));
  const Tensor full = tape.value(layer.forward(staged, tape.constant(x), ahat));

  for (std::size_t t = 0; t < t_len; ++t) {
    Tensor slice({p, c_in});
    for (std::size_t n = 0; n < p; ++n) {
      for (std::size_t c = 0; c < c_in; ++c) slice.at(n, c) = x.at(n, c, t);
    }
    const Tensor step = tape.value(layer.forward2d(staged, tape.constant(slice), ahat));
    for (std::size_t n = 0; n < p; ++n) {
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(std::abs(full.at(n * t_len + t, c) - step.at(n, c)) < 1e-12);
      }
    }
  }
}

TEST_CASE("layer norm module learns gain and bias") {
  LayerNormModule norm("ln", 3);
  ParamRegistry registry;
  norm.register_params(registry);
  norm.gain() = Tensor::from_values({2.0, 2.0, 2.0});
  norm.bias() = Tensor::from_values({1.0, 1.0, 1.0});

  ParamRegistry reg2;
  norm.register_params(reg2);
  Tape tape;
  StagedParams staged(tape, reg2);
  const Tensor out = tape.value(norm.forward(staged, tape.constant(Tensor::from_rows({{1, 2, 3}}))));
  // normalized row is [-sqrt(3/2), 0, sqrt(3/2)] before gain/bias
  CHECK(out.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.at(0, 2) == doctest::Approx(1.0 + 2.0 * std::sqrt(1.5)).epsilon(1e-4));
}
