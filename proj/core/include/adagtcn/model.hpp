#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "adagtcn/agl.hpp"
#include "adagtcn/gconv.hpp"
#include "adagtcn/params.hpp"
#include "adagtcn/preprocess.hpp"
#include "adagtcn/tconv.hpp"

namespace adagtcn {

/// How BandSequence rows map onto graph nodes. ElectrodeBand treats every
/// electrode-band pair as its own node with a scalar time series;
/// Electrode groups each electrode's 8 band rows into one node with 8
/// channels (row count must then be divisible by 8).
enum class NodeLayout { kElectrodeBand, kElectrode };

/// Output head. A softmax over a single neuron is constant, so the single
/// unit uses logistic squashing; the two-logit variant pins the second
/// logit at 0, which is algebraically the same mapping.
enum class HeadMode { kSingleLogistic, kTwoLogitSoftmax };

struct ModelConfig {
  std::size_t num_rows = 16;                   // p, rows of the BandSequence
  std::size_t max_length = kDefaultMaxLength;  // L, AGL input width
  NodeLayout node_layout = NodeLayout::kElectrodeBand;
  BandStatistic band_statistic = BandStatistic::kMeanMagnitude;

  AglConfig agl;

  std::size_t gcn_channels = 16;
  DnGcnConfig gcn;

  std::size_t tcn_channels = 16;
  DiTcnConfig tcn;
  std::vector<std::size_t> dilation_schedule;  // empty = doubling 1, 2, 4, ...
  std::size_t num_blocks = 2;

  std::vector<std::size_t> head_widths = {32, 16};
  HeadMode head_mode = HeadMode::kSingleLogistic;

  std::uint64_t seed = 42;

  std::size_t num_nodes() const {
    return node_layout == NodeLayout::kElectrodeBand ? num_rows : num_rows / kNumBands;
  }
  std::size_t input_channels() const {
    return node_layout == NodeLayout::kElectrodeBand ? 1 : kNumBands;
  }
  std::size_t agl_input_dim() const { return input_channels() * max_length; }
  std::vector<std::size_t> dilations() const;
  std::size_t receptive_field() const;
};

struct Prediction {
  double prob_tsr = 0.0;
  int label = 0;  // 1 = task-specific reading
};

/// Mean binary cross-entropy over per-sample probability outputs (each a
/// [1 x 1] Var), probabilities clamped to [1e-7, 1 - 1e-7].
Var bce_loss(const std::vector<Var>& probs, const std::vector<int>& labels);

class Model {
 public:
  explicit Model(ModelConfig config);

  // The registry points into layer-owned tensors; moving would invalidate it.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const ParamRegistry& params() const { return registry_; }
  ParamRegistry& params() { return registry_; }
  std::size_t parameter_count() const { return registry_.total_scalars(); }

  /// Per-forward stochastic draws. Dropout masks are inverted-scaled
  /// Bernoulli gates for the hidden head layers; empty when rate is 0.
  struct Noise {
    Tensor gumbel;
    std::vector<Tensor> dropout_masks;
  };
  Noise draw_noise(RngEngine& rng, double dropout_rate = 0.0) const;
  /// Noise-free draw used at inference: zero Gumbel perturbation, no dropout.
  Noise zero_noise() const;

  struct ForwardResult {
    Var prob;           // [1 x 1] probability of TSR
    Var adjacency;      // learned adjacency on the tape
    LearnedGraph graph; // value-level snapshot of the learned graph
  };

  /// Full pipeline: AGL over the zero-padded input, interleaved
  /// DN-GCN/LayerNorm/DI-TCN blocks over the valid prefix, masked temporal
  /// mean pooling, dense head.
  ForwardResult forward(StagedParams& staged, const BandSequence& sample,
                        const Noise& noise) const;

  /// Inference on a fresh tape; the noise stream is re-seeded from the
  /// config seed, so identical inputs give bit-identical probabilities.
  Prediction predict(const BandSequence& sample) const;

  /// AGL-only forward for graph inspection; same seeding rule as predict().
  LearnedGraph inspect_graph(const BandSequence& sample) const;

  AglLayer& agl() { return *agl_; }
  const AglLayer& agl() const { return *agl_; }

  // Layer access for serialization.
  struct Block {
    std::unique_ptr<DnGcnLayer> gcn;
    std::unique_ptr<LayerNormModule> norm;
    std::unique_ptr<DiTcnLayer> tcn;
  };
  std::vector<Block>& blocks() { return blocks_; }
  std::vector<Tensor>& head_weights() { return head_weights_; }
  std::vector<Tensor>& head_biases() { return head_biases_; }

 private:
  ModelConfig config_;
  std::unique_ptr<AglLayer> agl_;
  std::vector<Block> blocks_;
  std::vector<Tensor> head_weights_;
  std::vector<Tensor> head_biases_;
  std::vector<int> head_weight_ids_;
  std::vector<int> head_bias_ids_;
  ParamRegistry registry_;

  Tensor padded_agl_input(const BandSequence& sample, std::size_t valid) const;
  Tensor state_input(const BandSequence& sample, std::size_t valid) const;
};

/// Checkpoint serialization: a single self-describing JSON document with a
/// mandatory version field, the full config, the partition assignment, and
/// every parameter tensor with its shape.
void save_checkpoint(const Model& model, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace adagtcn
