#include "adagtcn/gconv.hpp"

#include <cmath>
#include <iostream>

#include "adagtcn/errors.hpp"
#include "adagtcn/ops.hpp"

namespace adagtcn {

Var normalize_adjacency(Var adjacency) {
  Tape& tape = *adjacency.tape;
  const Tensor& a = tape.value(adjacency);
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw ShapeError("normalize_adjacency: expected square matrix, got " + a.shape_str());
  }
  const std::size_t p = a.dim(0);
  const Var sym = ops::emax(adjacency, ops::transpose(adjacency));
  const Var with_self = ops::add(sym, tape.constant(Tensor::identity(p)));
  const Var inv_sqrt_deg = ops::rsqrt(ops::sum(with_self, 1));  // D_ii >= 1 always
  const Var outer = ops::matmul(ops::reshape(inv_sqrt_deg, {p, 1}),
                                ops::reshape(inv_sqrt_deg, {1, p}));
  return ops::mul(with_self, outer);
}

Var vanilla_gcn(Var h, Var a_hat, Var w) {
  return ops::relu(ops::matmul(ops::matmul(a_hat, h), w));
}

DnGcnLayer::DnGcnLayer(std::string name, std::size_t in_channels, std::size_t out_channels,
                       DnGcnConfig config, RngEngine& init_rng)
    : name_(std::move(name)),
      in_channels_(in_channels),
      out_channels_(out_channels),
      config_(std::move(config)) {
  const std::size_t depth = config_.depth;
  if (depth < 1) throw ConfigError("DN-GCN depth must be at least 1");
  if (config_.beta.size() != depth) {
    throw ConfigError("DN-GCN beta count " + std::to_string(config_.beta.size()) +
                      " does not match depth " + std::to_string(depth));
  }
  for (double b : config_.beta) {
    if (b < 0.0) throw ConfigError("DN-GCN beta coefficients must be non-negative");
  }
  double beta_sum = 0.0;
  for (double b : config_.beta) beta_sum += b;
  if (std::abs(beta_sum - 1.0) > 1e-9) {
    static bool warned = false;
    if (!warned) {
      warned = true;
      std::cerr << "warning: DN-GCN beta coefficients sum to " << beta_sum
                << " instead of 1\n";
    }
  }

  if (config_.selectors.empty()) {
    config_.selectors.assign(depth, std::vector<std::uint8_t>(out_channels, 1));
  }
  if (config_.selectors.size() != depth) {
    throw ConfigError("DN-GCN selector count does not match depth");
  }
  selector_all_on_.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    if (config_.selectors[l].size() != out_channels) {
      throw ConfigError("DN-GCN selector at depth " + std::to_string(l + 1) +
                        " must have one entry per output channel");
    }
    bool any = false, all = true;
    for (std::uint8_t v : config_.selectors[l]) {
      any = any || v != 0;
      all = all && v != 0;
    }
    selector_all_on_[l] = all;
    if (l + 1 == depth && !any) {
      throw ConfigError("DN-GCN selector at the final depth must be non-zero to preserve "
                        "the self-connection information flow");
    }
  }

  weights_.reserve(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t fan_in = l == 0 ? in_channels_ : out_channels_;
    weights_.push_back(
        xavier_uniform({fan_in, out_channels_}, fan_in, out_channels_, init_rng));
  }
}

void DnGcnLayer::register_params(ParamRegistry& registry) {
  weight_ids_.clear();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weight_ids_.push_back(registry.add(name_ + ".w" + std::to_string(l + 1), &weights_[l]));
  }
}

Var DnGcnLayer::forward(StagedParams& staged, Var x, Var a_hat) const {
  Tape& tape = staged.tape();
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 3 || xv.dim(1) != in_channels_) {
    throw ShapeError("DN-GCN input shape " + xv.shape_str() + " does not match [p, " +
                     std::to_string(in_channels_) + ", T]");
  }
  const std::size_t p = xv.dim(0);
  const std::size_t t_len = xv.dim(2);

  Var state = x;  // [p x C_l x T]
  std::size_t channels = in_channels_;
  Var accumulated;
  for (std::size_t l = 0; l < config_.depth; ++l) {
    const Var node_flat = ops::reshape(state, {p, channels * t_len});
    const Var propagated = ops::matmul(a_hat, node_flat);
    const Var channel_last = ops::reshape(
        ops::swap_last_axes(ops::reshape(propagated, {p, channels, t_len})), {p * t_len, channels});
    const Var projected = ops::matmul(channel_last, staged.var(weight_ids_[l]));

    Var term = projected;
    if (!selector_all_on_[l]) {
      Tensor gate({p * t_len, out_channels_});
      for (std::size_t r = 0; r < p * t_len; ++r) {
        for (std::size_t c = 0; c < out_channels_; ++c) {
          gate.at(r, c) = config_.selectors[l][c] ? 1.0 : 0.0;
        }
      }
      term = ops::mul(term, tape.constant(gate));
    }
    term = ops::scale(term, config_.beta[l]);
    accumulated = accumulated.valid() ? ops::add(accumulated, term) : term;

    if (l + 1 < config_.depth) {
      state = ops::swap_last_axes(ops::reshape(projected, {p, t_len, out_channels_}));
      channels = out_channels_;
    }
  }
  return config_.activation == GcnActivation::kRelu ? ops::relu(accumulated)
                                                    : ops::tanh(accumulated);
}

Var DnGcnLayer::forward2d(StagedParams& staged, Var h, Var a_hat) const {
  Tape& tape = staged.tape();
  const Tensor& hv = tape.value(h);
  if (hv.rank() != 2) {
    throw ShapeError("DN-GCN 2-D input must be [p x C], got " + hv.shape_str());
  }
  const std::size_t p = hv.dim(0), c = hv.dim(1);
  const Var as_state = ops::swap_last_axes(ops::reshape(h, {p, 1, c}));  // [p x C x 1]
  return forward(staged, as_state, a_hat);  // [(p*1) x C_out] == [p x C_out]
}

LayerNormModule::LayerNormModule(std::string name, std::size_t channels)
    : name_(std::move(name)), gain_({channels}, 1.0), bias_({channels}, 0.0) {}

void LayerNormModule::register_params(ParamRegistry& registry) {
  gain_id_ = registry.add(name_ + ".gain", &gain_);
  bias_id_ = registry.add(name_ + ".bias", &bias_);
}

Var LayerNormModule::forward(StagedParams& staged, Var x) const {
  return ops::layer_norm(x, staged.var(gain_id_), staged.var(bias_id_));
}

}  // namespace adagtcn
