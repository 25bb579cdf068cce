#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "adagtcn/datagen.hpp"
#include "adagtcn/model.hpp"

namespace adagtcn {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 4;
  std::size_t max_epochs = 20;
  double dropout = 0.0;          // applied to the hidden head layers only
  std::size_t repetitions = 10;  // protocol: re-seed with base seed + index
  std::size_t patience = 10;     // early stop on stalled validation loss
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::array<std::size_t, 3> split_ratios = {12, 2, 4};
  bool parallel_repetitions = true;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // class 1
  double recall = 0.0;     // class 1
  double micro_f1 = 0.0;
};

struct MetricsReport {
  Metrics mean;
  Metrics stddev;
  std::vector<Metrics> per_repetition;
};

/// Instance-level metrics from hard predictions. Precision/recall are for
/// class 1; micro-F1 pools both classes (and equals accuracy for
/// single-label binary classification).
Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels);

MetricsReport summarize_repetitions(const std::vector<Metrics>& repetitions);

/// One Adam update with bias correction; moment buffers are updated in
/// place. Throws NumericError on a non-finite gradient.
struct AdamState {
  Tensor first_moment;
  Tensor second_moment;
  std::size_t step = 0;
};
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double learning_rate,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Adam over a whole parameter registry, with per-parameter bound
/// projection after each update.
class AdamOptimizer {
 public:
  AdamOptimizer(ParamRegistry& registry, const TrainConfig& config);
  /// Reads gradients from the staged tape (after backward) and updates the
  /// registered tensors.
  void step(const StagedParams& staged);

 private:
  ParamRegistry* registry_;
  double learning_rate_, beta1_, beta2_, eps_;
  std::vector<AdamState> states_;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::unique_ptr<Model> model;  // best-validation parameters of repetition 0
  MetricsReport metrics;         // test metrics over all repetitions
  std::vector<std::vector<EpochStats>> history;  // per repetition, per epoch
  std::vector<double> best_val_losses;           // per repetition
};

/// Mini-batch Adam training with per-epoch validation tracking, best-val
/// checkpointing, early stopping, and the repetition protocol (repetition r
/// re-seeds everything with config.seed + r; reported metrics are the mean
/// over repetitions). With max_epochs = 0 the initialized model is returned
/// untouched and evaluated as-is.
TrainResult train(const ModelConfig& model_config, const SplitDatasets& datasets,
                  const TrainConfig& train_config);

/// Hard-label evaluation of a model over a sample set.
Metrics evaluate(const Model& model, const std::vector<SessionSample>& samples);

/// Mean binary cross-entropy of the model's predictions (no gradient).
double evaluate_loss(const Model& model, const std::vector<SessionSample>& samples);

/// Learned-graph statistics JSON for one sample:
/// {"p":, "k_edges":, "edges": [[src, dst, score]...],
///  "avg_node_degree":, "total_edges":}
std::string inspect_graph_json(const Model& model, const BandSequence& sample);

/// Mean directed precision of per-session learned masks against a reference
/// graph (off-diagonal entries only).
double mean_mask_precision(const Model& model, const std::vector<SessionSample>& samples,
                           const Tensor& reference);

}  // namespace adagtcn
