#include "advsr/dsp.h"

#include <cmath>
#include <numbers>

#include "advsr/error.h"

namespace advsr::dsp {

namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2; n must be a power of two.
void fft_pow2(std::vector<cd>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles computed directly rather than by repeated multiplication.
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(len);
      const cd w(std::cos(ang), std::sin(ang));
      for (std::size_t i = 0; i < n; i += len) {
        const cd u = a[i + k];
        const cd v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

std::vector<cd> bluestein(std::span<const cd> x, bool inverse) {
  const std::size_t n = x.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  const double sign = inverse ? 1.0 : -1.0;

  // chirp[k] = exp(sign * i*pi*k^2/n); k^2 reduced mod 2n for accuracy.
  std::vector<cd> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = sign * std::numbers::pi * static_cast<double>(k2) /
                       static_cast<double>(n);
    chirp[k] = cd(std::cos(ang), std::sin(ang));
  }

  std::vector<cd> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    b[k] = b[m - k] = std::conj(chirp[k]);
  }
  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_pow2(a, true);

  std::vector<cd> out(n);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * inv_m * chirp[k];
  return out;
}

std::vector<cd> naive(std::span<const cd> x, bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = sign * 2.0 * std::numbers::pi *
                         static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * cd(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

std::vector<cd> dft(std::span<const cd> x, bool inverse) {
  if (x.empty()) throw DomainError("dft of empty sequence");
  if (is_pow2(x.size())) {
    std::vector<cd> a(x.begin(), x.end());
    fft_pow2(a, inverse);
    return a;
  }
  if (x.size() <= 16) return naive(x, inverse);
  return bluestein(x, inverse);
}

Spectrum rfft(std::span<const double> x) {
  if (x.empty()) throw DomainError("rfft of empty sequence");
  std::vector<cd> c(x.begin(), x.end());
  auto full = dft(c, false);
  Spectrum s;
  s.n = x.size();
  s.bins.assign(full.begin(), full.begin() + static_cast<long>(x.size() / 2 + 1));
  s.bins[0].imag(0.0);
  if (s.n % 2 == 0) s.bins.back().imag(0.0);
  return s;
}

std::vector<double> irfft(const Spectrum& s) {
  if (s.n == 0 || s.bins.size() != s.n / 2 + 1) {
    throw DomainError("irfft: bin count does not match length");
  }
  const std::size_t n = s.n;
  std::vector<cd> full(n);
  for (std::size_t k = 0; k < s.bins.size(); ++k) full[k] = s.bins[k];
  full[0].imag(0.0);
  if (n % 2 == 0) full[n / 2].imag(0.0);
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) full[n - k] = std::conj(s.bins[k]);
  const auto t = dft(full, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = t[i].real() / static_cast<double>(n);
  return out;
}

PsdProfile psd(const Spectrum& s) {
  if (s.n == 0 || s.bins.size() != s.n / 2 + 1) {
    throw DomainError("psd: bin count does not match length");
  }
  const double n2 = static_cast<double>(s.n) * static_cast<double>(s.n);
  PsdProfile p;
  p.power.resize(s.bins.size());
  for (std::size_t k = 0; k < s.bins.size(); ++k) {
    const bool unpaired = k == 0 || (s.n % 2 == 0 && k == s.n / 2);
    p.power[k] = std::norm(s.bins[k]) * (unpaired ? 1.0 : 2.0) / n2;
  }
  return p;
}

}  // namespace advsr::dsp
