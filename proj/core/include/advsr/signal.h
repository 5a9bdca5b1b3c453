#ifndef ADVSR_SIGNAL_H_
#define ADVSR_SIGNAL_H_

#include <filesystem>
#include <span>
#include <vector>

namespace advsr::signal {

// Mono audio. Samples are nominally in [-1, 1]; construction only enforces
// non-emptiness, finiteness and a positive rate so that attack code can build
// unclipped intermediates.
class Waveform {
 public:
  Waveform(std::vector<double> samples, int sample_rate);

  std::span<const double> samples() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  std::size_t size() const { return samples_.size(); }

 private:
  std::vector<double> samples_;
  int sample_rate_;
};

// Additive perturbation; may be all zeros.
class Perturbation {
 public:
  explicit Perturbation(std::vector<double> delta);
  static Perturbation zeros(std::size_t n) {
    return Perturbation(std::vector<double>(n, 0.0));
  }

  std::span<const double> values() const { return delta_; }
  std::size_t size() const { return delta_.size(); }

 private:
  std::vector<double> delta_;
};

enum class NormKind { kL2, kLinf };

double norm(std::span<const double> v, NormKind kind);

// Reads RIFF/WAVE PCM16 mono; samples are divided by 32768.
Waveform load_wav(const std::filesystem::path& path);

// Clips to [-1, 1], then rounds 32767*s to the nearest integer.
void save_wav(const Waveform& w, const std::filesystem::path& path);

// 20*log10(|x|_2 / |delta|_2). Returns +inf for a zero perturbation.
double snr_db(std::span<const double> x, std::span<const double> delta);
double snr_db(const Waveform& x, const Perturbation& delta);

// L2 radius that realises `snr` dB against x.
double eps_from_snr(std::span<const double> x, double snr);
double eps_from_snr(const Waveform& x, double snr);

// x + delta, coordinate-wise clipped to [-1, 1].
Waveform apply(const Waveform& x, const Perturbation& delta);

}  // namespace advsr::signal

#endif  // ADVSR_SIGNAL_H_
