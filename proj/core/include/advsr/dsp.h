#ifndef ADVSR_DSP_H_
#define ADVSR_DSP_H_

#include <complex>
#include <span>
#include <vector>

namespace advsr::dsp {

// Half spectrum of an n-point real transform: bins 0..n/2.
struct Spectrum {
  std::vector<std::complex<double>> bins;
  std::size_t n = 0;
};

// Per-bin power, normalised so that the sum equals the mean square of the
// time-domain signal.
struct PsdProfile {
  std::vector<double> power;
};

// Exact-length DFT of real input, no padding. Power-of-two sizes use radix-2,
// everything else goes through Bluestein's chirp-z.
Spectrum rfft(std::span<const double> x);

// Inverse of rfft. Imaginary parts of the DC and Nyquist bins are ignored.
std::vector<double> irfft(const Spectrum& s);

PsdProfile psd(const Spectrum& s);

// Full complex DFT, forward (inverse=false) or unnormalised inverse.
std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x,
                                      bool inverse);

}  // namespace advsr::dsp

#endif  // ADVSR_DSP_H_
