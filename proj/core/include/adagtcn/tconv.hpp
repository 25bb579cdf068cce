#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adagtcn/params.hpp"
#include "adagtcn/rng.hpp"

namespace adagtcn {

struct DiTcnConfig {
  std::size_t max_width = 7;       // D; branches use widths 2..D
  std::size_t out_channels = 16;   // total concatenated channels
};

/// Splits `total` output channels across the D-1 branches as evenly as
/// possible, remainder going to the smallest filter widths.
std::vector<std::size_t> branch_channel_split(std::size_t total, std::size_t branches);

/// Total receptive field of `num_blocks` stacked inception blocks:
/// 1 + sum_b (D - 1) * dilation_b.
std::size_t receptive_field(std::size_t max_width, const std::vector<std::size_t>& dilations,
                            std::size_t num_blocks);

/// Dilated Inception Temporal Convolution: parallel valid-mode dilated
/// convolutions with filter widths 2..D, each branch truncated to the length
/// of the widest branch by keeping the trailing window, then concatenated on
/// the channel axis. One filter bank is shared across all p node streams.
class DiTcnLayer {
 public:
  DiTcnLayer(std::string name, std::size_t in_channels, DiTcnConfig config,
             RngEngine& init_rng);

  void register_params(ParamRegistry& registry);

  /// x: [p x C_in x T] -> [p x C_out x (T - (D-1)*dilation)].
  Var forward(StagedParams& staged, Var x, std::size_t dilation) const;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return config_.out_channels; }
  const DiTcnConfig& config() const { return config_; }
  const std::vector<std::size_t>& branch_channels() const { return branch_channels_; }
  std::vector<Tensor>& filters() { return filters_; }

 private:
  std::string name_;
  std::size_t in_channels_;
  DiTcnConfig config_;
  std::vector<std::size_t> branch_channels_;  // per width 2..D
  std::vector<Tensor> filters_;               // [c_b x C_in x d] per branch
  std::vector<int> filter_ids_;
};

}  // namespace adagtcn
