#include "adagtcn/grad_suite.hpp"

#include "adagtcn/agl.hpp"
#include "adagtcn/errors.hpp"
#include "adagtcn/gconv.hpp"
#include "adagtcn/grad_check.hpp"
#include "adagtcn/model.hpp"
#include "adagtcn/ops.hpp"
#include "adagtcn/tconv.hpp"

namespace adagtcn {

namespace {

Tensor random_tensor(Shape shape, RngEngine& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

GradSuiteEntry agl_entry() {
  RngEngine rng(2024);
  AglConfig cfg;
  cfg.embedding_dim = 3;
  cfg.k_partitions = 2;
  cfg.k_edges = 2;
  AglLayer layer(6, 5, cfg, rng);
  ParamRegistry registry;
  layer.register_params(registry);

  RngEngine data_rng(2025);
  const Tensor input = random_tensor({6, 5}, data_rng);
  const Tensor noise = layer.draw_gumbel(data_rng);
  const Tensor readout = random_tensor({6, 6}, data_rng);

  std::vector<Tensor> inputs = {input};
  for (const ParamRef& ref : registry.refs()) inputs.push_back(*ref.tensor);

  const auto f = [&](Tape& tape, const std::vector<Var>& leaves) {
    StagedParams staged(tape, std::vector<Var>(leaves.begin() + 1, leaves.end()));
    const auto out = layer.forward(staged, leaves[0], noise);
    return ops::sum(ops::mul(out.adjacency, tape.constant(readout)));
  };
  const GradCheckReport report = check_gradients(f, inputs, 1e-5, 1e-4);
  return {"agl", report.max_rel_err, 1e-4, report.pass};
}

GradSuiteEntry gconv_entry() {
  RngEngine rng(2026);
  DnGcnConfig cfg;
  cfg.depth = 2;
  cfg.beta = {0.5, 0.6};
  DnGcnLayer layer("gcn", 3, 3, cfg, rng);
  ParamRegistry registry;
  layer.register_params(registry);

  RngEngine data_rng(2027);
  Tensor adjacency({4, 4});
  for (std::size_t i = 0; i < adjacency.numel(); ++i) {
    adjacency[i] = data_rng.uniform(0.0, 1.0);
  }
  const Tensor h = random_tensor({4, 3}, data_rng);
  const Tensor readout = random_tensor({4, 3}, data_rng);

  std::vector<Tensor> inputs = {adjacency, h};
  for (const ParamRef& ref : registry.refs()) inputs.push_back(*ref.tensor);

  const auto f = [&](Tape& tape, const std::vector<Var>& leaves) {
    StagedParams staged(tape, std::vector<Var>(leaves.begin() + 2, leaves.end()));
    const Var out = layer.forward2d(staged, leaves[1], normalize_adjacency(leaves[0]));
    return ops::sum(ops::mul(out, tape.constant(readout)));
  };
  const GradCheckReport report = check_gradients(f, inputs, 1e-5, 1e-4);
  return {"gconv", report.max_rel_err, 1e-4, report.pass};
}

GradSuiteEntry tconv_entry() {
  RngEngine rng(2028);
  DiTcnLayer layer("tcn", 2, DiTcnConfig{3, 4}, rng);
  ParamRegistry registry;
  layer.register_params(registry);

  RngEngine data_rng(2029);
  const Tensor x = random_tensor({2, 2, 12}, data_rng);
  const Tensor readout = random_tensor({2, 4, 10}, data_rng);

  std::vector<Tensor> inputs = {x};
  for (const ParamRef& ref : registry.refs()) inputs.push_back(*ref.tensor);

  const auto f = [&](Tape& tape, const std::vector<Var>& leaves) {
    StagedParams staged(tape, std::vector<Var>(leaves.begin() + 1, leaves.end()));
    return ops::sum(ops::mul(layer.forward(staged, leaves[0], 1), tape.constant(readout)));
  };
  const GradCheckReport report = check_gradients(f, inputs, 1e-5, 1e-4);
  return {"tconv", report.max_rel_err, 1e-4, report.pass};
}

GradSuiteEntry head_entry() {
  RngEngine rng(2030);
  const Tensor x = random_tensor({1, 10}, rng);
  const Tensor w1 = random_tensor({10, 4}, rng, 0.5);
  const Tensor b1 = random_tensor({1, 4}, rng, 0.2);
  const Tensor w2 = random_tensor({4, 1}, rng, 0.5);
  const Tensor b2 = random_tensor({1, 1}, rng, 0.2);

  const auto f = [](Tape&, const std::vector<Var>& in) {
    const Var hidden = ops::relu(ops::add(ops::matmul(in[0], in[1]), in[2]));
    const Var prob = ops::sigmoid(ops::add(ops::matmul(hidden, in[3]), in[4]));
    return bce_loss({prob}, {1});
  };
  const GradCheckReport report = check_gradients(f, {x, w1, b1, w2, b2}, 1e-5, 1e-4);
  return {"head", report.max_rel_err, 1e-4, report.pass};
}

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.num_rows = 6;
  cfg.max_length = 12;
  cfg.agl.embedding_dim = 3;
  cfg.agl.k_partitions = 2;
  cfg.agl.k_edges = 2;
  cfg.gcn_channels = 4;
  cfg.gcn.depth = 2;
  cfg.gcn.beta = {0.5, 0.6};
  cfg.tcn_channels = 3;
  cfg.tcn.max_width = 3;
  cfg.num_blocks = 1;
  cfg.head_widths = {4, 3};
  cfg.seed = 99;
  return cfg;
}

GradSuiteEntry model_entry() {
  Model model(tiny_model_config());

  RngEngine data_rng(2031);
  BandSequence sample;
  sample.features = random_tensor({6, 10}, data_rng);
  sample.mask.assign(10, 1);
  RngEngine noise_rng(2032);
  const Model::Noise noise = model.draw_noise(noise_rng, 0.0);

  std::vector<Tensor> inputs;
  for (const ParamRef& ref : model.params().refs()) inputs.push_back(*ref.tensor);

  const auto f = [&](Tape& tape, const std::vector<Var>& leaves) {
    StagedParams staged(tape, leaves);
    const auto result = model.forward(staged, sample, noise);
    return bce_loss({result.prob}, {1});
  };
  const GradCheckReport report = check_gradients(f, inputs, 1e-5, 1e-3);
  return {"model", report.max_rel_err, 1e-3, report.pass};
}

}  // namespace

std::vector<GradSuiteEntry> run_grad_suite(const std::string& module) {
  std::vector<GradSuiteEntry> entries;
  const bool all = module == "all";
  if (all || module == "agl") entries.push_back(agl_entry());
  if (all || module == "gconv") entries.push_back(gconv_entry());
  if (all || module == "tconv") entries.push_back(tconv_entry());
  if (all) entries.push_back(head_entry());
  if (all || module == "model") entries.push_back(model_entry());
  if (entries.empty()) {
    throw ConfigError("unknown gradient-check module \"" + module +
                      "\"; expected all|agl|gconv|tconv|model");
  }
  return entries;
}

}  // namespace adagtcn
