#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adagtcn/tensor.hpp"

namespace adagtcn {

/// One eye fixation. Word index is the 0-based position in reading order,
/// which may differ from linguistic order (regressions re-visit earlier
/// words later in time).
struct FixationEvent {
  std::size_t word_index = 0;
  double onset_ms = 0.0;
  double duration_ms = 0.0;
  double gaze_x = 0.0;
};

/// Raw EEG samples recorded during one fixation window.
struct RawEegSegment {
  Tensor samples;  // [electrodes x T]
  double sample_rate_hz = 0.0;
};

/// Per-session feature matrix: one row per node (electrode x band), one
/// column per word fixation, zero-padded on the right with the mask marking
/// valid columns. Valid columns always form a prefix.
struct BandSequence {
  Tensor features;                 // [p x L]
  std::vector<std::uint8_t> mask;  // length L, 1 = valid

  std::size_t num_nodes() const { return features.rank() == 2 ? features.dim(0) : 0; }
  std::size_t length() const { return mask.size(); }
  /// Number of leading valid columns; throws if the mask is not a prefix.
  std::size_t valid_length() const;
};

struct FfdWindow {
  std::size_t word_index = 0;
  double onset_ms = 0.0;
  double duration_ms = 0.0;
};

inline constexpr std::size_t kNumBands = 8;

/// The eight spectral bands, in order: theta1, theta2, alpha1, alpha2,
/// beta1, beta2, gamma1, gamma2. Values are Hz edges, inclusive.
inline constexpr std::array<std::array<double, 2>, kNumBands> kBandRangesHz = {{
    {4.0, 6.0},
    {6.5, 8.0},
    {8.5, 10.0},
    {10.5, 13.0},
    {13.5, 18.0},
    {18.5, 30.0},
    {30.5, 40.0},
    {40.0, 49.5},
}};

inline constexpr std::array<const char*, kNumBands> kBandNames = {
    "theta1", "theta2", "alpha1", "alpha2", "beta1", "beta2", "gamma1", "gamma2"};

/// Statistic taken over the band-restricted signal within a window.
/// MeanMagnitude is linear in signal amplitude; MeanPower is quadratic.
enum class BandStatistic { kMeanMagnitude, kMeanPower };

inline constexpr std::size_t kDefaultMaxLength = 168;

/// First-Fixation-Duration segmentation: keeps only the earliest fixation
/// for each distinct word, in visit order. Input must be sorted by onset.
std::vector<FfdWindow> segment_ffd(const std::vector<FixationEvent>& fixations);

/// Per-electrode, per-band statistic of the band-restricted signal
/// (rectangular DFT mask, inverse transform, then the statistic over the
/// window). Output is a vector of length electrodes * 8, electrode-major with
/// bands in kBandRangesHz order. Requires sample rate >= 99 Hz (Nyquist for
/// the top gamma2 edge) and at least 2 samples.
Tensor band_features(const RawEegSegment& segment,
                     BandStatistic statistic = BandStatistic::kMeanMagnitude);

/// Packs per-word feature vectors (each [p]) into a [p x L] BandSequence:
/// columns 0..n-1 in fixation order, the rest zero with mask = 0.
BandSequence assemble_session(const std::vector<Tensor>& per_word_features,
                              std::size_t max_length = kDefaultMaxLength);

}  // namespace adagtcn
