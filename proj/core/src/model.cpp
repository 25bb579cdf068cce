#include "adagtcn/model.hpp"

#include <cmath>

#include "adagtcn/errors.hpp"
#include "adagtcn/ops.hpp"

namespace adagtcn {

std::vector<std::size_t> ModelConfig::dilations() const {
  if (!dilation_schedule.empty()) return dilation_schedule;
  std::vector<std::size_t> doubling(num_blocks);
  std::size_t r = 1;
  for (std::size_t b = 0; b < num_blocks; ++b) {
    doubling[b] = r;
    r *= 2;
  }
  return doubling;
}

std::size_t ModelConfig::receptive_field() const {
  return adagtcn::receptive_field(tcn.max_width, dilations(), num_blocks);
}

Var bce_loss(const std::vector<Var>& probs, const std::vector<int>& labels) {
  if (probs.empty()) throw ConfigError("bce_loss: empty batch");
  if (probs.size() != labels.size()) {
    throw ConfigError("bce_loss: " + std::to_string(probs.size()) + " probabilities vs " +
                      std::to_string(labels.size()) + " labels");
  }
  Tape& tape = *probs[0].tape;
  Var total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw DataError("bce_loss: label must be 0 or 1, got " + std::to_string(labels[i]));
    }
    const Var clamped = ops::clamp(probs[i], 1e-7, 1.0 - 1e-7);
    const Var p = labels[i] == 1
                      ? clamped
                      : ops::sub(tape.constant(Tensor::scalar(1.0)), clamped);
    const Var term = ops::neg(ops::log(p));
    total = total.valid() ? ops::add(total, term) : term;
  }
  return ops::scale(total, 1.0 / static_cast<double>(probs.size()));
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  if (config_.num_blocks < 1) throw ConfigError("model needs at least one block");
  if (config_.node_layout == NodeLayout::kElectrode && config_.num_rows % kNumBands != 0) {
    throw ConfigError("electrode node layout requires the row count (" +
                      std::to_string(config_.num_rows) + ") to be divisible by " +
                      std::to_string(kNumBands));
  }
  if (config_.head_widths.empty()) throw ConfigError("head needs at least one dense layer");
  if (!config_.dilation_schedule.empty() &&
      config_.dilation_schedule.size() != config_.num_blocks) {
    throw ConfigError("dilation schedule length does not match num_blocks");
  }

  RngEngine init_rng(config_.seed);
  agl_ = std::make_unique<AglLayer>(config_.num_nodes(), config_.agl_input_dim(), config_.agl,
                                    init_rng);

  blocks_.reserve(config_.num_blocks);
  for (std::size_t b = 0; b < config_.num_blocks; ++b) {
    const std::size_t in_channels = b == 0 ? config_.input_channels() : config_.tcn_channels;
    const std::string tag = "block" + std::to_string(b);
    Block block;
    block.gcn = std::make_unique<DnGcnLayer>(tag + ".gcn", in_channels, config_.gcn_channels,
                                             config_.gcn, init_rng);
    block.norm = std::make_unique<LayerNormModule>(tag + ".norm", config_.gcn_channels);
    block.tcn = std::make_unique<DiTcnLayer>(
        tag + ".tcn", config_.gcn_channels,
        DiTcnConfig{config_.tcn.max_width, config_.tcn_channels}, init_rng);
    blocks_.push_back(std::move(block));
  }

  std::size_t width = config_.num_nodes() * config_.tcn_channels;
  for (std::size_t h = 0; h < config_.head_widths.size(); ++h) {
    const std::size_t out = config_.head_widths[h];
    head_weights_.push_back(xavier_uniform({width, out}, width, out, init_rng));
    head_biases_.push_back(Tensor({1, out}));
    width = out;
  }
  head_weights_.push_back(xavier_uniform({width, 1}, width, 1, init_rng));
  head_biases_.push_back(Tensor({1, 1}));

  agl_->register_params(registry_);
  for (Block& block : blocks_) {
    block.gcn->register_params(registry_);
    block.norm->register_params(registry_);
    block.tcn->register_params(registry_);
  }
  for (std::size_t h = 0; h < head_weights_.size(); ++h) {
    head_weight_ids_.push_back(registry_.add("head.w" + std::to_string(h), &head_weights_[h]));
    head_bias_ids_.push_back(registry_.add("head.b" + std::to_string(h), &head_biases_[h]));
  }
}

Model::Noise Model::zero_noise() const {
  Noise noise;
  noise.gumbel = Tensor({config_.agl.k_partitions, config_.num_nodes() * config_.num_nodes()});
  return noise;
}

Model::Noise Model::draw_noise(RngEngine& rng, double dropout_rate) const {
  if (dropout_rate < 0.0 || dropout_rate > 0.8) {
    throw ConfigError("dropout rate must lie in [0, 0.8], got " +
                      std::to_string(dropout_rate));
  }
  Noise noise;
  noise.gumbel = agl_->draw_gumbel(rng);
  if (dropout_rate > 0.0) {
    const double keep_scale = 1.0 / (1.0 - dropout_rate);
    for (std::size_t width : config_.head_widths) {
      Tensor mask({1, width});
      for (std::size_t i = 0; i < width; ++i) {
        mask[i] = rng.uniform() >= dropout_rate ? keep_scale : 0.0;
      }
      noise.dropout_masks.push_back(std::move(mask));
    }
  }
  return noise;
}

Tensor Model::padded_agl_input(const BandSequence& sample, std::size_t valid) const {
  // Zero-padded to the configured width; the AGL projection has one input
  // column per padded timestep (and per channel under the electrode layout).
  const std::size_t nodes = config_.num_nodes();
  const std::size_t channels = config_.input_channels();
  const std::size_t max_len = config_.max_length;
  Tensor padded({nodes, channels * max_len});
  for (std::size_t node = 0; node < nodes; ++node) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t row = node * channels + c;
      for (std::size_t t = 0; t < valid; ++t) {
        padded.at(node, c * max_len + t) = sample.features.at(row, t);
      }
    }
  }
  return padded;
}

Tensor Model::state_input(const BandSequence& sample, std::size_t valid) const {
  const std::size_t nodes = config_.num_nodes();
  const std::size_t channels = config_.input_channels();
  Tensor state({nodes, channels, valid});
  for (std::size_t node = 0; node < nodes; ++node) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t row = node * channels + c;
      for (std::size_t t = 0; t < valid; ++t) {
        state.at(node, c, t) = sample.features.at(row, t);
      }
    }
  }
  return state;
}

Model::ForwardResult Model::forward(StagedParams& staged, const BandSequence& sample,
                                    const Noise& noise) const {
  Tape& tape = staged.tape();
  if (sample.features.rank() != 2 || sample.features.dim(0) != config_.num_rows) {
    throw ShapeError("sample shape " + sample.features.shape_str() +
                     " does not match configured rows " + std::to_string(config_.num_rows));
  }
  if (sample.mask.size() != sample.features.dim(1)) {
    throw DataError("sample mask length does not match feature columns");
  }
  const std::size_t valid = sample.valid_length();
  if (valid > config_.max_length) {
    throw DataError("session has " + std::to_string(valid) +
                    " valid steps, exceeding configured max_length " +
                    std::to_string(config_.max_length));
  }
  const std::size_t field = config_.receptive_field();
  if (valid < field) {
    throw LengthError("session length " + std::to_string(valid) +
                      " is shorter than the model receptive field " + std::to_string(field));
  }

  // Graph learned per forward pass from the session's own (padded) input.
  const Var agl_input = tape.constant(padded_agl_input(sample, valid));
  const AglLayer::Output agl_out = agl_->forward(staged, agl_input, noise.gumbel);
  const Var a_hat = normalize_adjacency(agl_out.adjacency);

  // Temporal pathway runs on the valid prefix only, which realizes masked
  // pooling: every surviving timestep is fully inside valid data.
  Var state = tape.constant(state_input(sample, valid));
  const std::vector<std::size_t> dilations = config_.dilations();
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& block = blocks_[b];
    const std::size_t t_len = tape.value(state).dim(2);
    const Var spatial = block.gcn->forward(staged, state, a_hat);   // [(p*T) x C]
    const Var normed = block.norm->forward(staged, spatial);
    const Var back_to_state = ops::swap_last_axes(
        ops::reshape(normed, {config_.num_nodes(), t_len, config_.gcn_channels}));
    state = block.tcn->forward(staged, back_to_state, dilations[b]);
  }

  // Temporal mean pooling via a constant averaging matrix, then flatten.
  const Tensor& final_state = tape.value(state);
  const std::size_t t_final = final_state.dim(2);
  const std::size_t rows = config_.num_nodes() * config_.tcn_channels;
  Tensor averager({t_final, 1}, 1.0 / static_cast<double>(t_final));
  const Var pooled = ops::matmul(ops::reshape(state, {rows, t_final}), tape.constant(averager));
  Var h = ops::reshape(pooled, {1, rows});

  for (std::size_t layer = 0; layer < config_.head_widths.size(); ++layer) {
    h = ops::relu(ops::add(ops::matmul(h, staged.var(head_weight_ids_[layer])),
                           staged.var(head_bias_ids_[layer])));
    if (layer < noise.dropout_masks.size()) {
      h = ops::mul(h, tape.constant(noise.dropout_masks[layer]));
    }
  }
  const Var logit = ops::add(ops::matmul(h, staged.var(head_weight_ids_.back())),
                             staged.var(head_bias_ids_.back()));

  Var prob;
  if (config_.head_mode == HeadMode::kSingleLogistic) {
    prob = ops::sigmoid(logit);
  } else {
    const Var logits = ops::concat({logit, tape.constant(Tensor({1, 1}))}, 1);
    prob = ops::narrow(ops::softmax(logits, 1), 1, 0, 1);
  }

  ForwardResult result;
  result.prob = prob;
  result.adjacency = agl_out.adjacency;
  result.graph = agl_->graph_from(agl_out);
  return result;
}

Prediction Model::predict(const BandSequence& sample) const {
  Tape tape;
  StagedParams staged(tape, registry_);
  // Inference is noise-free: the Gumbel perturbation exists to push
  // gradients through the discrete edge choice during training.
  const ForwardResult result = forward(staged, sample, zero_noise());
  Prediction prediction;
  prediction.prob_tsr = tape.value(result.prob)[0];
  prediction.label = prediction.prob_tsr >= 0.5 ? 1 : 0;
  return prediction;
}

LearnedGraph Model::inspect_graph(const BandSequence& sample) const {
  Tape tape;
  StagedParams staged(tape, registry_);
  const Noise noise = zero_noise();
  const std::size_t valid = sample.valid_length();
  if (sample.features.dim(0) != config_.num_rows) {
    throw ShapeError("sample shape " + sample.features.shape_str() +
                     " does not match configured rows " + std::to_string(config_.num_rows));
  }
  if (valid > config_.max_length) {
    throw DataError("session exceeds configured max_length");
  }
  const Var agl_input = tape.constant(padded_agl_input(sample, valid));
  return agl_->graph_from(agl_->forward(staged, agl_input, noise.gumbel));
}

}  // namespace adagtcn
