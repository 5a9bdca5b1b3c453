#ifndef ADVSR_FEATURES_H_
#define ADVSR_FEATURES_H_

#include "advsr/grad.h"
#include "advsr/signal.h"

namespace advsr::model {

struct FeatureConfig {
  std::size_t frame_len = 128;
  std::size_t hop = 64;
  std::size_t n_bins = 32;
  double floor = 1e-8;

  void validate() const;
  bool operator==(const FeatureConfig&) const = default;
};

std::size_t num_frames(std::size_t samples, const FeatureConfig& cfg);

// Log-power spectrogram with a rectangular window:
//   feat[t][k] = log(|X_t[k]|^2 / frame_len^2 + floor),  k < n_bins
// where X_t is the DFT of frame t. Differentiable w.r.t. the 1 x N input.
grad::Tensor extract_features(grad::Tensor waveform, const FeatureConfig& cfg);
grad::Matrix extract_features(const signal::Waveform& w, const FeatureConfig& cfg);

}  // namespace advsr::model

#endif  // ADVSR_FEATURES_H_
