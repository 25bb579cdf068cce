#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "adagtcn/rng.hpp"
#include "adagtcn/tape.hpp"

namespace adagtcn {

/// Named handle to a trainable tensor owned by a layer. Optional bounds are
/// enforced by the optimizer after each update (projection).
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// Flat registry of every trainable tensor in a model, in a stable order.
/// Layers register pointers at construction; the pointed-to tensors must
/// outlive the registry.
class ParamRegistry {
 public:
  int add(std::string name, Tensor* tensor) {
    refs_.push_back({std::move(name), tensor});
    return static_cast<int>(refs_.size()) - 1;
  }

  int add_bounded(std::string name, Tensor* tensor, double lower, double upper) {
    refs_.push_back({std::move(name), tensor, lower, upper});
    return static_cast<int>(refs_.size()) - 1;
  }

  std::size_t count() const { return refs_.size(); }
  const ParamRef& ref(int id) const { return refs_[id]; }
  const std::vector<ParamRef>& refs() const { return refs_; }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const ParamRef& r : refs_) n += r.tensor->numel();
    return n;
  }

 private:
  std::vector<ParamRef> refs_;
};

/// All registered parameters staged as leaves on one tape. Staging once per
/// tape lets a whole mini-batch accumulate into the same parameter gradients.
class StagedParams {
 public:
  StagedParams(Tape& tape, const ParamRegistry& registry) : tape_(&tape) {
    vars_.reserve(registry.count());
    for (const ParamRef& r : registry.refs()) vars_.push_back(tape.leaf(*r.tensor, true));
  }

  /// Stage over externally supplied leaves (registry order). Used by the
  /// gradient checker to substitute perturbed parameter values.
  StagedParams(Tape& tape, std::vector<Var> vars) : tape_(&tape), vars_(std::move(vars)) {}

  Tape& tape() const { return *tape_; }
  Var var(int id) const { return vars_[id]; }
  const Tensor& grad(int id) const { return tape_->grad(vars_[id]); }

 private:
  Tape* tape_;
  std::vector<Var> vars_;
};

/// Xavier/Glorot uniform initialization.
inline Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                             RngEngine& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

}  // namespace adagtcn
