#include "adagtcn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include <json.hpp>

#include "adagtcn/errors.hpp"
#include "adagtcn/ops.hpp"

namespace adagtcn {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double learning_rate,
               double beta1, double beta2, double eps) {
  if (!param.same_shape(grad)) {
    throw ShapeError("adam_step: gradient shape " + grad.shape_str() +
                     " does not match parameter " + param.shape_str());
  }
  if (state.step == 0) {
    state.first_moment = Tensor(param.shape());
    state.second_moment = Tensor(param.shape());
  }
  ++state.step;
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double g = grad[i];
    state.first_moment[i] = beta1 * state.first_moment[i] + (1.0 - beta1) * g;
    state.second_moment[i] = beta2 * state.second_moment[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.first_moment[i] / bias1;
    const double v_hat = state.second_moment[i] / bias2;
    param[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + eps);
  }
}

AdamOptimizer::AdamOptimizer(ParamRegistry& registry, const TrainConfig& config)
    : registry_(&registry),
      learning_rate_(config.learning_rate),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(config.adam_eps),
      states_(registry.count()) {}

void AdamOptimizer::step(const StagedParams& staged) {
  for (std::size_t id = 0; id < registry_->count(); ++id) {
    const ParamRef& ref = registry_->ref(static_cast<int>(id));
    const Tensor& grad = staged.grad(static_cast<int>(id));
    if (!grad.all_finite()) {
      throw NumericError("non-finite gradient for parameter " + ref.name);
    }
    adam_step(*ref.tensor, grad, states_[id], learning_rate_, beta1_, beta2_, eps_);
    if (std::isfinite(ref.lower) || std::isfinite(ref.upper)) {
      for (std::size_t i = 0; i < ref.tensor->numel(); ++i) {
        (*ref.tensor)[i] = std::min(std::max((*ref.tensor)[i], ref.lower), ref.upper);
      }
    }
  }
}

namespace {

double clamped_bce(double prob, int label) {
  const double p = std::min(std::max(prob, 1e-7), 1.0 - 1e-7);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

std::vector<Tensor> snapshot_params(const ParamRegistry& registry) {
  std::vector<Tensor> out;
  out.reserve(registry.count());
  for (const ParamRef& ref : registry.refs()) out.push_back(*ref.tensor);
  return out;
}

void restore_params(ParamRegistry& registry, const std::vector<Tensor>& snapshot) {
  for (std::size_t i = 0; i < registry.count(); ++i) {
    *registry.ref(static_cast<int>(i)).tensor = snapshot[i];
  }
}

struct RepetitionOutcome {
  std::unique_ptr<Model> model;
  Metrics test_metrics;
  std::vector<EpochStats> history;
  double best_val_loss = 0.0;
};

RepetitionOutcome run_repetition(ModelConfig model_config, const SplitDatasets& datasets,
                                 const TrainConfig& cfg, std::size_t repetition) {
  model_config.seed += repetition;  // appendix protocol: base seed + index
  auto model = std::make_unique<Model>(model_config);
  AdamOptimizer optimizer(model->params(), cfg);
  RngEngine train_rng(model_config.seed ^ 0x9E3779B97F4A7C15ULL);

  RepetitionOutcome outcome;
  std::vector<Tensor> best = snapshot_params(model->params());
  double best_val = evaluate_loss(*model, datasets.val);
  std::size_t stalled = 0;

  std::vector<std::size_t> order(datasets.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    train_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      Tape tape;
      StagedParams staged(tape, model->params());
      std::vector<Var> probs;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        const SessionSample& sample = datasets.train[order[i]];
        const Model::Noise noise = model->draw_noise(train_rng, cfg.dropout);
        probs.push_back(model->forward(staged, sample.sequence, noise).prob);
        labels.push_back(sample.label);
      }
      const Var loss = bce_loss(probs, labels);
      const double loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batches));
      }
      tape.backward(loss);
      optimizer.step(staged);
      epoch_loss += loss_value;
      ++batches;
    }

    const double val_loss = evaluate_loss(*model, datasets.val);
    outcome.history.push_back({batches == 0 ? 0.0 : epoch_loss / static_cast<double>(batches),
                               val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      best = snapshot_params(model->params());
      stalled = 0;
    } else {
      ++stalled;
      if (stalled >= cfg.patience) break;
    }
  }

  restore_params(model->params(), best);
  outcome.best_val_loss = best_val;
  outcome.test_metrics = evaluate(*model, datasets.test);
  outcome.model = std::move(model);
  return outcome;
}

}  // namespace

TrainResult train(const ModelConfig& model_config, const SplitDatasets& datasets,
                  const TrainConfig& train_config) {
  if (datasets.train.empty() || datasets.val.empty()) {
    throw ConfigError("training needs non-empty train and validation sets");
  }
  if (datasets.test.empty()) {
    throw ConfigError("training needs a non-empty test set for the metrics report");
  }
  if (train_config.repetitions == 0) throw ConfigError("repetitions must be at least 1");
  if (train_config.learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (train_config.batch_size < 1) throw ConfigError("batch size must be at least 1");

  std::vector<RepetitionOutcome> outcomes(train_config.repetitions);
  if (train_config.parallel_repetitions && train_config.repetitions > 1) {
    // Repetitions are independent (own model, tape, rng); results are
    // deterministic regardless of scheduling.
    std::vector<std::future<RepetitionOutcome>> futures;
    futures.reserve(train_config.repetitions);
    for (std::size_t r = 0; r < train_config.repetitions; ++r) {
      futures.push_back(std::async(std::launch::async, [&, r] {
        return run_repetition(model_config, datasets, train_config, r);
      }));
    }
    for (std::size_t r = 0; r < train_config.repetitions; ++r) outcomes[r] = futures[r].get();
  } else {
    for (std::size_t r = 0; r < train_config.repetitions; ++r) {
      outcomes[r] = run_repetition(model_config, datasets, train_config, r);
    }
  }

  TrainResult result;
  std::vector<Metrics> per_rep;
  for (RepetitionOutcome& outcome : outcomes) {
    per_rep.push_back(outcome.test_metrics);
    result.history.push_back(std::move(outcome.history));
    result.best_val_losses.push_back(outcome.best_val_loss);
  }
  result.metrics = summarize_repetitions(per_rep);
  result.model = std::move(outcomes[0].model);
  return result;
}

Metrics evaluate(const Model& model, const std::vector<SessionSample>& samples) {
  if (samples.empty()) throw ConfigError("evaluate: empty sample set");
  std::vector<int> predictions, labels;
  predictions.reserve(samples.size());
  for (const SessionSample& sample : samples) {
    predictions.push_back(model.predict(sample.sequence).label);
    labels.push_back(sample.label);
  }
  return compute_metrics(predictions, labels);
}

double evaluate_loss(const Model& model, const std::vector<SessionSample>& samples) {
  if (samples.empty()) throw ConfigError("evaluate_loss: empty sample set");
  double total = 0.0;
  for (const SessionSample& sample : samples) {
    total += clamped_bce(model.predict(sample.sequence).prob_tsr, sample.label);
  }
  return total / static_cast<double>(samples.size());
}

std::string inspect_graph_json(const Model& model, const BandSequence& sample) {
  const LearnedGraph graph = model.inspect_graph(sample);
  const GraphStats stats = undirected_graph_stats(graph.mask);
  const std::size_t p = graph.mask.dim(0);

  nlohmann::json doc;
  doc["p"] = p;
  doc["k_edges"] = graph.k_edges;
  nlohmann::json edges = nlohmann::json::array();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (graph.mask.at(i, j) != 0.0) {
        edges.push_back({i, j, graph.scores.at(i, j)});
      }
    }
  }
  doc["edges"] = std::move(edges);
  doc["avg_node_degree"] = stats.avg_node_degree;
  doc["total_edges"] = stats.total_edges;
  return doc.dump(2);
}

double mean_mask_precision(const Model& model, const std::vector<SessionSample>& samples,
                           const Tensor& reference) {
  if (samples.empty()) throw ConfigError("mean_mask_precision: empty sample set");
  double total = 0.0;
  for (const SessionSample& sample : samples) {
    total += edge_precision(model.inspect_graph(sample.sequence).mask, reference);
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace adagtcn
