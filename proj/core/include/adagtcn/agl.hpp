#pragma once

#include <cstddef>
#include <vector>

#include "adagtcn/params.hpp"
#include "adagtcn/rng.hpp"

namespace adagtcn {

struct AglConfig {
  std::size_t embedding_dim = 40;   // d_e, width of the per-partition projection
  std::size_t k_partitions = 2;     // node subsets, each with its own projection
  std::size_t k_edges = 4;          // edges kept per row of the score matrix
  double omega_init = 0.5;          // saturation coefficient (trainable scalar)
  double lambda_init = 0.5;         // diagonal-suppression constant (trainable scalar)
  double tau = 0.5;                 // fixed Gumbel-softmax temperature
};

/// Sparse learned graph over the p nodes: continuous edge scores, the binary
/// top-k row mask, and their product.
struct LearnedGraph {
  Tensor scores;     // [p x p]
  Tensor mask;       // [p x p], k_edges ones per row
  Tensor adjacency;  // scores * mask
  std::size_t k_edges = 0;
};

struct GraphStats {
  double avg_node_degree = 0.0;
  std::size_t total_edges = 0;
};

/// Undirected degree statistics of a binary mask: edges of mask union its
/// transpose, self-loops excluded.
GraphStats undirected_graph_stats(const Tensor& mask);

/// Gumbel-softmax relaxation over the candidate axis (axis 0):
/// weights = softmax((scores + noise) / tau, 0). Noise must be i.i.d.
/// Gumbel(0, 1) and shaped like the stacked scores.
Var gumbel_relaxed_weights(Var stacked_scores, const Tensor& noise, double tau);

/// Adaptive Graph Learning layer. Learns a sparse directed adjacency over p
/// nodes from the per-node temporal feature matrix. Nodes are assigned to
/// k_partitions disjoint subsets once at construction (seeded); each subset
/// gets its own feature projection, candidate score matrices are blended per
/// node pair with Gumbel-softmax weights, and the top k_edges per row are
/// kept.
class AglLayer {
 public:
  AglLayer(std::size_t num_nodes, std::size_t input_dim, AglConfig config, RngEngine& init_rng);

  void register_params(ParamRegistry& registry);

  struct Output {
    Var scores;        // [p x p], differentiable
    Tensor mask;       // binary top-k selection (constant w.r.t. gradients)
    Var adjacency;     // scores * mask; gradients reach only selected scores
    Var weights;       // [k_partitions x p*p] Gumbel-softmax candidate weights
    std::vector<Var> candidates;  // per-partition score matrices M_i
  };

  /// Full layer: sparse features -> candidate adjacencies -> edge selection.
  /// gumbel_noise must come from draw_gumbel (or be frozen for checking).
  Output forward(StagedParams& staged, Var input, const Tensor& gumbel_noise) const;

  /// X_i = tanh(omega * N * theta_i) with rows outside partition i zeroed.
  Var sparse_features(StagedParams& staged, Var input, std::size_t partition) const;

  /// M_i = relu(phi(tanh(sum_{j != i} X_i X_j^T - lambda * sum_j X_j X_j^T))).
  Var candidate_adjacency(StagedParams& staged, const std::vector<Var>& sparse, std::size_t partition) const;

  /// Gumbel-softmax blend over the per-partition candidates followed by
  /// top-k row selection.
  Output select_edges(StagedParams& staged, const std::vector<Var>& candidates,
                      const Tensor& gumbel_noise) const;

  /// I.i.d. Gumbel(0,1) draw shaped [k_partitions x p*p].
  Tensor draw_gumbel(RngEngine& rng) const;

  LearnedGraph graph_from(const Output& out) const;

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t input_dim() const { return input_dim_; }
  const AglConfig& config() const { return config_; }
  const std::vector<std::size_t>& partition_of_node() const { return partition_of_node_; }
  void set_partition_of_node(std::vector<std::size_t> assignment);

  // Parameter access for serialization and counting.
  std::vector<Tensor>& theta() { return theta_; }
  Tensor& phi_weight() { return phi_weight_; }
  Tensor& phi_bias() { return phi_bias_; }
  Tensor& omega() { return omega_; }
  Tensor& lambda() { return lambda_; }

 private:
  std::size_t num_nodes_;
  std::size_t input_dim_;
  AglConfig config_;
  std::vector<std::size_t> partition_of_node_;
  std::vector<Tensor> partition_row_masks_;  // [p x d_e] per partition

  std::vector<Tensor> theta_;  // k_partitions x [input_dim x d_e]
  Tensor phi_weight_;          // [p x p]
  Tensor phi_bias_;            // [p]
  Tensor omega_;               // scalar
  Tensor lambda_;              // scalar

  std::vector<int> theta_ids_;
  int phi_weight_id_ = -1;
  int phi_bias_id_ = -1;
  int omega_id_ = -1;
  int lambda_id_ = -1;

  void rebuild_row_masks();
};

}  // namespace adagtcn
