#pragma once

// Iterative radix-2 complex FFT, double precision. Sizes are small and fixed
// (512-point spectra, a few thousand points for cross-correlation), so a
// plain Cooley-Tukey loop is plenty.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sdar {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place FFT; invert=true gives the inverse transform scaled by 1/N.
inline void fft(std::vector<std::complex<double>>& a, bool invert = false) {
  const std::size_t n = a.size();
  if (n == 0) return;
  if ((n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const double pi = 3.14159265358979323846264338327950288;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / static_cast<double>(len) * (invert ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (invert) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

// FFT of a real signal zero-padded to fft_size; returns the full complex spectrum.
inline std::vector<std::complex<double>> real_fft(const std::vector<double>& x,
                                                  std::size_t fft_size) {
  std::vector<std::complex<double>> a(fft_size, {0.0, 0.0});
  const std::size_t n = x.size() < fft_size ? x.size() : fft_size;
  for (std::size_t i = 0; i < n; ++i) a[i] = {x[i], 0.0};
  fft(a, false);
  return a;
}

}  // namespace sdar
