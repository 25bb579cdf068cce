#include "adagtcn/agl.hpp"

#include <numeric>

#include "adagtcn/errors.hpp"
#include "adagtcn/ops.hpp"

namespace adagtcn {

GraphStats undirected_graph_stats(const Tensor& mask) {
  if (mask.rank() != 2 || mask.dim(0) != mask.dim(1)) {
    throw ShapeError("graph stats: expected square mask, got " + mask.shape_str());
  }
  const std::size_t p = mask.dim(0);
  std::size_t edges = 0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      if (mask.at(i, j) != 0.0 || mask.at(j, i) != 0.0) ++edges;
    }
  }
  GraphStats stats;
  stats.total_edges = edges;
  stats.avg_node_degree = p == 0 ? 0.0 : 2.0 * static_cast<double>(edges) / static_cast<double>(p);
  return stats;
}

Var gumbel_relaxed_weights(Var stacked_scores, const Tensor& noise, double tau) {
  Tape& tape = *stacked_scores.tape;
  if (tau <= 0.0) throw ConfigError("gumbel_relaxed_weights: tau must be positive");
  if (tape.value(stacked_scores).shape() != noise.shape()) {
    throw ShapeError("gumbel_relaxed_weights: noise shape " + noise.shape_str() +
                     " does not match scores " + tape.value(stacked_scores).shape_str());
  }
  const Var perturbed =
      ops::scale(ops::add(stacked_scores, tape.constant(noise)), 1.0 / tau);
  return ops::softmax(perturbed, 0);
}

AglLayer::AglLayer(std::size_t num_nodes, std::size_t input_dim, AglConfig config,
                   RngEngine& init_rng)
    : num_nodes_(num_nodes), input_dim_(input_dim), config_(config) {
  if (config_.k_partitions < 2) {
    throw ConfigError("AGL requires at least 2 node partitions, got " +
                      std::to_string(config_.k_partitions));
  }
  if (config_.k_partitions > num_nodes_) {
    throw ConfigError("AGL partitions (" + std::to_string(config_.k_partitions) +
                      ") exceed node count (" + std::to_string(num_nodes_) + ")");
  }
  if (config_.k_edges < 1 || config_.k_edges > num_nodes_) {
    throw ConfigError("AGL k_edges must lie in [1, p], got " +
                      std::to_string(config_.k_edges));
  }
  if (config_.tau <= 0.0) throw ConfigError("AGL tau must be positive");
  if (config_.embedding_dim < 1) throw ConfigError("AGL embedding_dim must be positive");

  // One-time uniform random assignment of nodes to partitions.
  std::vector<std::size_t> order(num_nodes_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  init_rng.shuffle(order);
  partition_of_node_.assign(num_nodes_, 0);
  for (std::size_t i = 0; i < num_nodes_; ++i) {
    partition_of_node_[order[i]] = i % config_.k_partitions;
  }
  rebuild_row_masks();

  // One shared random projection to start: cross-partition products then
  // begin from the data's Gram structure instead of independent-projection
  // noise, and the per-partition maps decouple during training. The doubled
  // scale keeps that structure visible against optimizer drift.
  theta_.reserve(config_.k_partitions);
  Tensor shared = xavier_uniform({input_dim_, config_.embedding_dim}, input_dim_,
                                 config_.embedding_dim, init_rng);
  for (std::size_t i = 0; i < shared.numel(); ++i) shared[i] *= 1.0;
  theta_.push_back(std::move(shared));
  for (std::size_t i = 1; i < config_.k_partitions; ++i) theta_.push_back(theta_[0]);
  // Near-identity init of the square row mixer: candidate adjacencies start
  // close to the regularized Gram structure, with noise to break symmetry.
  phi_weight_ = xavier_uniform({num_nodes_, num_nodes_}, num_nodes_, num_nodes_, init_rng);
  for (std::size_t i = 0; i < phi_weight_.numel(); ++i) phi_weight_[i] *= 0.2;
  for (std::size_t i = 0; i < num_nodes_; ++i) phi_weight_.at(i, i) += 1.0;
  phi_bias_ = Tensor({num_nodes_});
  omega_ = Tensor::scalar(config_.omega_init);
  lambda_ = Tensor::scalar(config_.lambda_init);
}

void AglLayer::rebuild_row_masks() {
  partition_row_masks_.assign(config_.k_partitions,
                              Tensor({num_nodes_, config_.embedding_dim}));
  for (std::size_t node = 0; node < num_nodes_; ++node) {
    Tensor& mask = partition_row_masks_[partition_of_node_[node]];
    for (std::size_t c = 0; c < config_.embedding_dim; ++c) mask.at(node, c) = 1.0;
  }
}

void AglLayer::set_partition_of_node(std::vector<std::size_t> assignment) {
  if (assignment.size() != num_nodes_) {
    throw ConfigError("partition assignment size does not match node count");
  }
  for (std::size_t part : assignment) {
    if (part >= config_.k_partitions) {
      throw ConfigError("partition index out of range in assignment");
    }
  }
  partition_of_node_ = std::move(assignment);
  rebuild_row_masks();
}

void AglLayer::register_params(ParamRegistry& registry) {
  theta_ids_.clear();
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    theta_ids_.push_back(registry.add("agl.theta" + std::to_string(i), &theta_[i]));
  }
  phi_weight_id_ = registry.add("agl.phi.weight", &phi_weight_);
  phi_bias_id_ = registry.add("agl.phi.bias", &phi_bias_);
  // Trainable scalars, clamped for stability.
  omega_id_ = registry.add_bounded("agl.omega", &omega_, 0.01, 2.0);
  lambda_id_ = registry.add_bounded("agl.lambda", &lambda_, 0.01, 2.0);
}

Var AglLayer::sparse_features(StagedParams& staged, Var input, std::size_t partition) const {
  if (partition >= config_.k_partitions) {
    throw ConfigError("sparse_features: partition index " + std::to_string(partition) +
                      " out of range");
  }
  Tape& tape = staged.tape();
  const Var projected = ops::matmul(input, staged.var(theta_ids_[partition]));
  const Var saturated = ops::tanh(ops::mul(projected, staged.var(omega_id_)));
  return ops::mul(saturated, tape.constant(partition_row_masks_[partition]));
}

Var AglLayer::candidate_adjacency(StagedParams& staged, const std::vector<Var>& sparse,
                                  std::size_t partition) const {
  if (sparse.size() < 2) {
    throw ConfigError("candidate_adjacency needs at least 2 partitions; the cross-partition "
                      "sum would be empty");
  }
  Var cross;
  Var self_sum;
  for (std::size_t j = 0; j < sparse.size(); ++j) {
    const Var outer = ops::matmul(sparse[j], ops::transpose(sparse[j]));
    self_sum = self_sum.valid() ? ops::add(self_sum, outer) : outer;
    if (j != partition) {
      const Var pair = ops::matmul(sparse[partition], ops::transpose(sparse[j]));
      cross = cross.valid() ? ops::add(cross, pair) : pair;
    }
  }
  const Var regularized =
      ops::sub(cross, ops::mul(self_sum, staged.var(lambda_id_)));
  const Var candidate = ops::tanh(regularized);
  const Var mixed =
      ops::add_rowvec(ops::matmul(candidate, staged.var(phi_weight_id_)),
                      staged.var(phi_bias_id_));
  return ops::relu(mixed);
}

Tensor AglLayer::draw_gumbel(RngEngine& rng) const {
  Tensor noise({config_.k_partitions, num_nodes_ * num_nodes_});
  for (std::size_t i = 0; i < noise.numel(); ++i) noise[i] = rng.gumbel();
  return noise;
}

AglLayer::Output AglLayer::select_edges(StagedParams& staged,
                                        const std::vector<Var>& candidates,
                                        const Tensor& gumbel_noise) const {
  if (candidates.size() < 2) {
    throw ConfigError("select_edges requires at least 2 candidate matrices");
  }
  Tape& tape = staged.tape();
  const std::size_t p = num_nodes_;
  const Shape expected{candidates.size(), p * p};
  if (gumbel_noise.shape() != expected) {
    throw ShapeError("select_edges: noise shape " + gumbel_noise.shape_str() +
                     " does not match " + shape_string(expected));
  }

  std::vector<Var> flat;
  flat.reserve(candidates.size());
  for (const Var& m : candidates) flat.push_back(ops::reshape(m, {1, p * p}));
  const Var stacked = ops::concat(flat, 0);  // [k x p^2]

  const Var weights = gumbel_relaxed_weights(stacked, gumbel_noise, config_.tau);
  const Var blended = ops::sum(ops::mul(weights, stacked), 0);  // [p^2]
  const Var scores = ops::reshape(blended, {p, p});

  Output out;
  out.scores = scores;
  out.weights = weights;
  out.candidates = candidates;
  out.mask = ops::topk_mask_values(tape.value(scores), config_.k_edges);
  // Straight-through: the binary mask is constant in the product, so the
  // adjacency gradient reaches exactly the selected score entries.
  out.adjacency = ops::mul(scores, tape.constant(out.mask));
  return out;
}

AglLayer::Output AglLayer::forward(StagedParams& staged, Var input,
                                   const Tensor& gumbel_noise) const {
  const Tensor& in_val = staged.tape().value(input);
  if (in_val.rank() != 2 || in_val.dim(0) != num_nodes_ || in_val.dim(1) != input_dim_) {
    throw ShapeError("AGL input shape " + in_val.shape_str() + " does not match expected [" +
                     std::to_string(num_nodes_) + ", " + std::to_string(input_dim_) + "]");
  }
  std::vector<Var> sparse;
  sparse.reserve(config_.k_partitions);
  for (std::size_t i = 0; i < config_.k_partitions; ++i) {
    sparse.push_back(sparse_features(staged, input, i));
  }
  std::vector<Var> candidates;
  candidates.reserve(config_.k_partitions);
  for (std::size_t i = 0; i < config_.k_partitions; ++i) {
    candidates.push_back(candidate_adjacency(staged, sparse, i));
  }
  return select_edges(staged, candidates, gumbel_noise);
}

LearnedGraph AglLayer::graph_from(const Output& out) const {
  LearnedGraph graph;
  graph.scores = out.scores.value();
  graph.mask = out.mask;
  graph.adjacency = out.adjacency.value();
  graph.k_edges = config_.k_edges;
  return graph;
}

}  // namespace adagtcn
