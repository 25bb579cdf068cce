#include "adagtcn/tconv.hpp"

#include "adagtcn/errors.hpp"
#include "adagtcn/ops.hpp"

namespace adagtcn {

std::vector<std::size_t> branch_channel_split(std::size_t total, std::size_t branches) {
  if (branches == 0) throw ConfigError("channel split: no branches");
  if (total < branches) {
    throw ConfigError("channel split: " + std::to_string(total) +
                      " channels cannot cover " + std::to_string(branches) + " branches");
  }
  std::vector<std::size_t> split(branches, total / branches);
  const std::size_t remainder = total % branches;
  for (std::size_t i = 0; i < remainder; ++i) ++split[i];  // extra channels to smallest widths
  return split;
}

std::size_t receptive_field(std::size_t max_width, const std::vector<std::size_t>& dilations,
                            std::size_t num_blocks) {
  std::size_t field = 1;
  for (std::size_t b = 0; b < num_blocks; ++b) {
    const std::size_t r = b < dilations.size() ? dilations[b] : dilations.back();
    field += (max_width - 1) * r;
  }
  return field;
}

DiTcnLayer::DiTcnLayer(std::string name, std::size_t in_channels, DiTcnConfig config,
                       RngEngine& init_rng)
    : name_(std::move(name)), in_channels_(in_channels), config_(config) {
  if (config_.max_width < 2 || config_.max_width > 7) {
    throw ConfigError("DI-TCN max filter width must lie in [2, 7], got " +
                      std::to_string(config_.max_width));
  }
  const std::size_t branches = config_.max_width - 1;
  branch_channels_ = branch_channel_split(config_.out_channels, branches);
  filters_.reserve(branches);
  for (std::size_t b = 0; b < branches; ++b) {
    const std::size_t width = b + 2;
    const std::size_t fan_in = in_channels_ * width;
    filters_.push_back(xavier_uniform({branch_channels_[b], in_channels_, width}, fan_in,
                                      branch_channels_[b], init_rng));
  }
}

void DiTcnLayer::register_params(ParamRegistry& registry) {
  filter_ids_.clear();
  for (std::size_t b = 0; b < filters_.size(); ++b) {
    filter_ids_.push_back(
        registry.add(name_ + ".filter_w" + std::to_string(b + 2), &filters_[b]));
  }
}

Var DiTcnLayer::forward(StagedParams& staged, Var x, std::size_t dilation) const {
  Tape& tape = staged.tape();
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 3 || xv.dim(1) != in_channels_) {
    throw ShapeError("DI-TCN input shape " + xv.shape_str() + " does not match [p, " +
                     std::to_string(in_channels_) + ", T]");
  }
  const std::size_t t_len = xv.dim(2);
  const std::size_t needed = (config_.max_width - 1) * dilation + 1;
  if (t_len < needed) {
    throw LengthError("DI-TCN: sequence length " + std::to_string(t_len) +
                      " shorter than widest branch; need T >= " + std::to_string(needed));
  }
  const std::size_t t_out = t_len - (config_.max_width - 1) * dilation;

  std::vector<Var> branches;
  branches.reserve(filters_.size());
  for (std::size_t b = 0; b < filters_.size(); ++b) {
    const std::size_t width = b + 2;
    Var out = ops::conv1d_dilated_batched(x, staged.var(filter_ids_[b]), dilation);
    // keep the trailing window so every branch aligns with the widest one
    const std::size_t branch_len = t_len - (width - 1) * dilation;
    if (branch_len > t_out) {
      out = ops::narrow(out, 2, branch_len - t_out, t_out);
    }
    if (tape.value(out).dim(2) != t_out) {
      throw NumericError("DI-TCN: branch emitted mismatched temporal length");
    }
    branches.push_back(out);
  }
  return ops::concat(branches, 1);
}

}  // namespace adagtcn
