#pragma once

#include <cstdint>
#include <vector>

#include "adagtcn/params.hpp"
#include "adagtcn/rng.hpp"

namespace adagtcn {

/// Symmetrically renormalized adjacency with self-connections:
/// Ahat = D^{-1/2} (A' + I) D^{-1/2} with A' = max(A, A^T) and D the degree
/// diagonal of A' + I. Directed input is symmetrized by the elementwise max
/// so no learned edge is dropped. Fully differentiable.
Var normalize_adjacency(Var adjacency);

/// Plain GCN propagation relu(Ahat * H * W).
Var vanilla_gcn(Var h, Var a_hat, Var w);

enum class GcnActivation { kRelu, kTanh };

struct DnGcnConfig {
  std::size_t depth = 2;                        // K
  std::vector<double> beta = {0.5, 0.6};        // depth regularization coefficients
  std::vector<std::vector<std::uint8_t>> selectors;  // per depth, per channel; empty = all-on
  GcnActivation activation = GcnActivation::kRelu;
};

/// Deep Neighborhood Graph Convolution. Intermediate states chain without a
/// nonlinearity, H^{l+1} = Ahat H^l W^l, and the output applies the
/// activation once to the beta/selector-weighted sum of depth contributions:
///   out = sigma(sum_l beta_l * Ahat H^l W^l S^l)
/// With depth 1, beta = 1 and an all-on selector this is exactly vanilla_gcn.
class DnGcnLayer {
 public:
  DnGcnLayer(std::string name, std::size_t in_channels, std::size_t out_channels,
             DnGcnConfig config, RngEngine& init_rng);

  void register_params(ParamRegistry& registry);

  /// x: [p x C_in x T] node-major state. Returns channel-last [(p*T) x C_out]
  /// (convenient for layer normalization; reshape/swap to recover 3-D).
  Var forward(StagedParams& staged, Var x, Var a_hat) const;

  /// Spec-shaped single-step form: h [p x C_in] -> [p x C_out].
  Var forward2d(StagedParams& staged, Var h, Var a_hat) const;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }
  const DnGcnConfig& config() const { return config_; }
  std::vector<Tensor>& weights() { return weights_; }

 private:
  std::string name_;
  std::size_t in_channels_;
  std::size_t out_channels_;
  DnGcnConfig config_;
  std::vector<Tensor> weights_;  // W^1 [C_in x C_out], W^2.. [C_out x C_out]
  std::vector<int> weight_ids_;
  std::vector<bool> selector_all_on_;
};

/// Learnable per-channel gain/bias wrapper over ops::layer_norm.
class LayerNormModule {
 public:
  LayerNormModule(std::string name, std::size_t channels);
  void register_params(ParamRegistry& registry);
  Var forward(StagedParams& staged, Var x) const;  // x: [rows x channels]
  Tensor& gain() { return gain_; }
  Tensor& bias() { return bias_; }

 private:
  std::string name_;
  Tensor gain_;
  Tensor bias_;
  int gain_id_ = -1;
  int bias_id_ = -1;
};

}  // namespace adagtcn
