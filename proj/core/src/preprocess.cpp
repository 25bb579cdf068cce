#include "adagtcn/preprocess.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "adagtcn/errors.hpp"

namespace adagtcn {

std::size_t BandSequence::valid_length() const {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  for (std::size_t i = n; i < mask.size(); ++i) {
    if (mask[i]) throw DataError("BandSequence mask is not a valid-prefix mask");
  }
  return n;
}

std::vector<FfdWindow> segment_ffd(const std::vector<FixationEvent>& fixations) {
  if (fixations.empty()) throw DataError("empty session: no fixations to segment");
  std::vector<FfdWindow> windows;
  std::unordered_set<std::size_t> seen;
  double prev_onset = -std::numeric_limits<double>::infinity();
  for (const FixationEvent& fix : fixations) {
    if (fix.onset_ms < prev_onset) {
      throw DataError("fixations not sorted by onset at word " +
                      std::to_string(fix.word_index));
    }
    prev_onset = fix.onset_ms;
    if (fix.duration_ms <= 0.0) {
      throw DataError("non-positive fixation duration at word " +
                      std::to_string(fix.word_index));
    }
    if (seen.insert(fix.word_index).second) {
      windows.push_back({fix.word_index, fix.onset_ms, fix.duration_ms});
    }
  }
  return windows;
}

namespace {

// Band-restricted reconstruction via rectangular DFT mask. O(T^2) per band;
// windows are short (one fixation) so the naive transform is adequate.
std::vector<double> band_filter(const double* signal, std::size_t t_len, double rate,
                                double lo_hz, double hi_hz) {
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<std::complex<double>> spectrum(t_len);
  for (std::size_t k = 0; k < t_len; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < t_len; ++t) {
      const double angle = -two_pi * static_cast<double>(k) * static_cast<double>(t) /
                           static_cast<double>(t_len);
      acc += signal[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    spectrum[k] = acc;
  }
  for (std::size_t k = 0; k < t_len; ++k) {
    const double signed_freq = (k <= t_len / 2)
                                   ? static_cast<double>(k) * rate / static_cast<double>(t_len)
                                   : (static_cast<double>(k) - static_cast<double>(t_len)) *
                                         rate / static_cast<double>(t_len);
    const double freq = std::abs(signed_freq);
    if (freq < lo_hz || freq > hi_hz) spectrum[k] = 0.0;
  }
  std::vector<double> out(t_len, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t k = 0; k < t_len; ++k) {
      const double angle = two_pi * static_cast<double>(k) * static_cast<double>(t) /
                           static_cast<double>(t_len);
      acc += spectrum[k] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[t] = acc.real() / static_cast<double>(t_len);
  }
  return out;
}

}  // namespace

Tensor band_features(const RawEegSegment& segment, BandStatistic statistic) {
  const Tensor& samples = segment.samples;
  if (samples.rank() != 2) {
    throw DataError("band_features: expected [electrodes x T] samples, got " +
                    samples.shape_str());
  }
  const double min_rate = 2.0 * kBandRangesHz.back()[1];
  if (segment.sample_rate_hz < min_rate) {
    throw DataError("band_features: sample rate " + std::to_string(segment.sample_rate_hz) +
                    " Hz below Nyquist limit; need >= " + std::to_string(min_rate));
  }
  const std::size_t electrodes = samples.dim(0);
  const std::size_t t_len = samples.dim(1);
  if (t_len < 2) {
    throw DataError("band_features: degenerate window of " + std::to_string(t_len) +
                    " samples");
  }

  Tensor out({electrodes * kNumBands});
  for (std::size_t e = 0; e < electrodes; ++e) {
    const double* signal = samples.raw() + e * t_len;
    for (std::size_t b = 0; b < kNumBands; ++b) {
      const std::vector<double> filtered =
          band_filter(signal, t_len, segment.sample_rate_hz, kBandRangesHz[b][0],
                      kBandRangesHz[b][1]);
      double acc = 0.0;
      for (double v : filtered) {
        acc += statistic == BandStatistic::kMeanMagnitude ? std::abs(v) : v * v;
      }
      out[e * kNumBands + b] = acc / static_cast<double>(t_len);
    }
  }
  return out;
}

BandSequence assemble_session(const std::vector<Tensor>& per_word_features,
                              std::size_t max_length) {
  const std::size_t n = per_word_features.size();
  if (n > max_length) {
    throw DataError("assemble_session: session has " + std::to_string(n) +
                    " fixations, exceeding max length " + std::to_string(max_length) +
                    "; increase max_length");
  }
  if (n == 0) throw DataError("assemble_session: empty session");
  const std::size_t p = per_word_features[0].numel();
  BandSequence seq;
  seq.features = Tensor({p, max_length});
  seq.mask.assign(max_length, 0);
  for (std::size_t col = 0; col < n; ++col) {
    const Tensor& vec = per_word_features[col];
    if (vec.numel() != p) {
      throw ShapeError("assemble_session: feature length " + std::to_string(vec.numel()) +
                       " at column " + std::to_string(col) + " does not match " +
                       std::to_string(p));
    }
    for (std::size_t r = 0; r < p; ++r) seq.features.at(r, col) = vec[r];
    seq.mask[col] = 1;
  }
  return seq;
}

}  // namespace adagtcn
