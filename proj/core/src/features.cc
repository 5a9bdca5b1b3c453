#include "advsr/features.h"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

#include "advsr/error.h"

namespace advsr::model {

namespace {

// frame_len x (2 * n_bins) matrix: cosine columns, then sine columns.
std::shared_ptr<const std::vector<double>> dft_basis(std::size_t frame_len, std::size_t n_bins) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const std::vector<double>>>
      cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{frame_len, n_bins}];
  if (!slot) {
    auto basis = std::make_shared<std::vector<double>>(frame_len * 2 * n_bins);
    for (std::size_t t = 0; t < frame_len; ++t) {
      for (std::size_t k = 0; k < n_bins; ++k) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>((k * t) % frame_len) /
                           static_cast<double>(frame_len);
        (*basis)[t * 2 * n_bins + k] = std::cos(ang);
        (*basis)[t * 2 * n_bins + n_bins + k] = -std::sin(ang);
      }
    }
    slot = std::move(basis);
  }
  return slot;
}

}  // namespace

void FeatureConfig::validate() const {
  if (frame_len == 0 || hop == 0 || hop > frame_len) {
    throw ConfigError("features: need 0 < hop <= frame_len");
  }
  if (n_bins == 0 || n_bins > frame_len / 2 + 1) {
    throw ConfigError("features: n_bins must be in [1, frame_len/2 + 1]");
  }
  if (!(floor > 0.0)) throw ConfigError("features: floor must be positive");
}

std::size_t num_frames(std::size_t samples, const FeatureConfig& cfg) {
  if (samples < cfg.frame_len) return 0;
  return (samples - cfg.frame_len) / cfg.hop + 1;
}

grad::Tensor extract_features(grad::Tensor waveform, const FeatureConfig& cfg) {
  cfg.validate();
  if (waveform.cols() < cfg.frame_len) {
    throw DomainError("extract_features: waveform of " + std::to_string(waveform.cols()) +
                      " samples is shorter than one frame");
  }
  auto& tape = waveform.tape();
  const auto basis = dft_basis(cfg.frame_len, cfg.n_bins);
  const grad::Tensor b = tape.constant_view(grad::Shape{cfg.frame_len, 2 * cfg.n_bins}, *basis);
  const grad::Tensor spec = grad::matmul(grad::frames(waveform, cfg.frame_len, cfg.hop), b);
  const grad::Tensor re = grad::slice_cols(spec, 0, cfg.n_bins);
  const grad::Tensor im = grad::slice_cols(spec, cfg.n_bins, 2 * cfg.n_bins);
  const double norm = 1.0 / (static_cast<double>(cfg.frame_len) * static_cast<double>(cfg.frame_len));
  const grad::Tensor power = grad::scale(grad::add(grad::mul(re, re), grad::mul(im, im)), norm);
  return grad::log(grad::add_scalar(power, cfg.floor));
}

grad::Matrix extract_features(const signal::Waveform& w, const FeatureConfig& cfg) {
  grad::Tape tape;
  const auto s = w.samples();
  const grad::Tensor x = tape.constant_view(grad::Shape{1, s.size()}, s);
  return extract_features(x, cfg).matrix();
}

}  // namespace advsr::model
