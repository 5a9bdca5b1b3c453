#include "advsr/dsp.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "advsr/error.h"
#include "test_support.h"

namespace advsr::dsp {
namespace {

double scale_of(std::span<const double> x) {
  double s = 1.0;
  for (double v : x) s += std::abs(v);
  return s;
}

TEST(Rfft, Impulse) {
  const std::vector<double> x{1, 0, 0, 0};
  const auto s = rfft(x);
  ASSERT_EQ(s.bins.size(), 3u);
  for (const auto& b : s.bins) {
    EXPECT_EQ(b.real(), 1.0);
    EXPECT_EQ(b.imag(), 0.0);
  }
}

TEST(Rfft, Constant) {
  const std::vector<double> x{1, 1, 1, 1};
  const auto s = rfft(x);
  EXPECT_NEAR(s.bins[0].real(), 4.0, 1e-15);
  EXPECT_NEAR(std::abs(s.bins[1]), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.bins[2]), 0.0, 1e-15);
}

TEST(Rfft, EmptyIsDomainError) { EXPECT_THROW(rfft(std::vector<double>{}), DomainError); }

TEST(Rfft, MatchesNaiveDftForLengths1To64) {
  std::mt19937_64 rng(21);
  for (std::size_t n = 1; n <= 64; ++n) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto x = testing::uniform_vector(rng, n, -1, 1);
      const auto s = rfft(x);
      const auto ref = testing::naive_dft(x);
      ASSERT_EQ(s.n, n);
      ASSERT_EQ(s.bins.size(), n / 2 + 1);
      const double tol = 1e-9 * scale_of(x);
      for (std::size_t k = 0; k < s.bins.size(); ++k) {
        EXPECT_NEAR(s.bins[k].real(), ref[k].real(), tol) << "n=" << n << " k=" << k;
        EXPECT_NEAR(s.bins[k].imag(), ref[k].imag(), tol) << "n=" << n << " k=" << k;
      }
      EXPECT_EQ(s.bins[0].imag(), 0.0);
      if (n % 2 == 0) {
        EXPECT_EQ(s.bins[n / 2].imag(), 0.0);
      }
    }
  }
}

TEST(Rfft, LongPrimeAndCompositeLengths) {
  std::mt19937_64 rng(22);
  for (std::size_t n : {127u, 257u, 360u, 1000u, 1280u}) {
    const auto x = testing::uniform_vector(rng, n, -1, 1);
    const auto s = rfft(x);
    const auto ref = testing::naive_dft(x);
    for (std::size_t k = 0; k < s.bins.size(); ++k) {
      EXPECT_LT(std::abs(s.bins[k] - ref[k]), 1e-9 * scale_of(x)) << "n=" << n;
    }
  }
}

TEST(Rfft, Linearity) {
  std::mt19937_64 rng(23);
  for (std::size_t n : {7u, 16u, 30u}) {
    const auto a = testing::uniform_vector(rng, n, -1, 1);
    const auto b = testing::uniform_vector(rng, n, -1, 1);
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = 2.0 * a[i] - 0.5 * b[i];
    const auto sa = rfft(a), sb = rfft(b), sc = rfft(c);
    for (std::size_t k = 0; k < sc.bins.size(); ++k) {
      EXPECT_LT(std::abs(sc.bins[k] - (2.0 * sa.bins[k] - 0.5 * sb.bins[k])), 1e-12);
    }
  }
}

TEST(Dft, ConjugateSymmetryOfRealInput) {
  std::mt19937_64 rng(24);
  for (std::size_t n = 1; n <= 20; ++n) {
    const auto x = testing::uniform_vector(rng, n, -1, 1);
    std::vector<std::complex<double>> cx(x.begin(), x.end());
    const auto full = dft(cx, false);
    for (std::size_t k = 1; k < n; ++k) {
      EXPECT_LT(std::abs(full[k] - std::conj(full[n - k])), 1e-12);
    }
    // Unnormalised inverse brings back n * x.
    const auto back = dft(full, true);
    for (std::size_t t = 0; t < n; ++t) {
      EXPECT_NEAR(back[t].real(), n * x[t], 1e-10);
    }
  }
}

TEST(Irfft, RoundTripLengths1To64) {
  std::mt19937_64 rng(25);
  for (std::size_t n = 1; n <= 64; ++n) {
    const auto x = testing::uniform_vector(rng, n, -1, 1);
    const auto y = irfft(rfft(x));
    ASSERT_EQ(y.size(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y[i], x[i], 1e-9) << "n=" << n;
  }
}

TEST(Irfft, ImpulseAndZero) {
  const auto y = irfft(rfft(std::vector<double>{1, 0, 0, 0, 0}));
  EXPECT_NEAR(y[0], 1.0, 1e-15);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_NEAR(y[i], 0.0, 1e-15);
  Spectrum z;
  z.n = 6;
  z.bins.assign(4, 0.0);
  for (double v : irfft(z)) EXPECT_EQ(v, 0.0);
}

TEST(Irfft, InconsistentLengthIsDomainError) {
  Spectrum s;
  s.n = 8;
  s.bins.assign(3, 0.0);
  EXPECT_THROW(irfft(s), DomainError);
  EXPECT_THROW(psd(s), DomainError);
}

TEST(Psd, CosineAtBin3) {
  const std::size_t n = 16;
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = std::cos(2.0 * std::numbers::pi * 3.0 * t / n);
  const auto p = psd(rfft(x));
  ASSERT_EQ(p.power.size(), 9u);
  for (std::size_t k = 0; k < p.power.size(); ++k) {
    EXPECT_NEAR(p.power[k], k == 3 ? 0.5 : 0.0, 1e-12) << k;
  }
}

TEST(Psd, ZeroSignal) {
  for (double v : psd(rfft(std::vector<double>(10, 0.0))).power) EXPECT_EQ(v, 0.0);
}

TEST(Psd, ParsevalLengths1To64) {
  std::mt19937_64 rng(26);
  for (std::size_t n = 1; n <= 64; ++n) {
    const auto x = testing::uniform_vector(rng, n, -1, 1);
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(n);
    double total = 0.0;
    for (double v : psd(rfft(x)).power) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, ms, 1e-9 * ms) << "n=" << n;
  }
}

}  // namespace
}  // namespace advsr::dsp
