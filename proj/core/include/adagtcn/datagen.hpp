#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adagtcn/preprocess.hpp"
#include "adagtcn/rng.hpp"

namespace adagtcn {

/// One reading session: the band-feature sequence, its binary label
/// (0 = natural reading, 1 = task-specific reading), and provenance ids.
struct SessionSample {
  BandSequence sequence;
  int label = 0;
  std::string participant_id;
  std::string session_id;
};

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct SplitDatasets {
  std::vector<SessionSample> train;
  std::vector<SessionSample> val;
  std::vector<SessionSample> test;
};

/// Ground-truth world for the synthetic generator: a planted directed graph
/// plus the class-conditional signal parameters. Class 0 sessions are
/// independent per-node AR(1) noise; class 1 sessions additionally carry
/// spike events on seed nodes that propagate along the planted edges with a
/// one-step lag and attenuation, giving both classes' discriminating signal
/// a spatial and a temporal signature.
struct PlantedWorld {
  Tensor adjacency;              // A*: [p x p] binary, no self-loops
  double ar_coeff = 0.55;        // AR(1) smoothness
  double noise_sigma = 0.25;     // innovation scale
  double spike_amplitude = 4.0;  // spike height on the seed node
  double tail = 0.8;             // seed decay fraction one step after onset
  double attenuation = 0.5;      // fraction arriving at graph neighbours
  std::size_t min_length = 48;   // session length range (word fixations)
  std::size_t max_length = 64;

  std::size_t num_rows() const { return adjacency.rank() == 2 ? adjacency.dim(0) : 0; }
};

/// Random planted graph with exactly `out_degree` edges per node, no
/// self-loops.
PlantedWorld make_planted_world(std::size_t num_rows, std::size_t out_degree, RngEngine& rng);

/// Deterministic synthetic dataset: balanced labels (within one sample),
/// participants assigned round-robin. Requires at least 3 participants so
/// participant-level splits remain possible.
std::vector<SessionSample> generate_synthetic(const PlantedWorld& world,
                                              std::size_t num_sessions,
                                              std::size_t num_participants, RngEngine& rng);

/// AGT1 dataset container. Binary layout (little-endian):
///   magic "AGT1" | version u32 | p u32 | session_count u64 | sessions...
/// each session:
///   participant id (u16 length + UTF-8) | session id (u16 length + UTF-8) |
///   label u8 | n u32 | row-major f64 matrix p x n
/// Paths ending in .json read/write an equivalent JSON mirror.
void save_dataset(const std::vector<SessionSample>& samples, const std::string& path);
std::vector<SessionSample> load_dataset(const std::string& path);

/// Participant-granular split. Ratios default to the 12:2:4 protocol and are
/// scaled to the available participant count (each part keeps at least one
/// participant). The participant order is shuffled by `seed`.
SplitDatasets split_by_participant(const std::vector<SessionSample>& samples,
                                   const std::array<std::size_t, 3>& ratios,
                                   std::uint64_t seed);
SplitDatasets split_by_participant(const std::vector<SessionSample>& samples,
                                   const SplitSpec& spec);

/// Fraction of off-diagonal mask edges present in the reference graph.
double edge_precision(const Tensor& mask, const Tensor& reference);
/// Off-diagonal edge density of a binary graph: edges / (p * (p - 1)).
double edge_density(const Tensor& graph);

}  // namespace adagtcn
