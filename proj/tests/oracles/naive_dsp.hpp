#pragma once

// Reference DSP implementations for oracle tests. Everything here is written
// directly from the documented formulas (direct O(N^2) DFT, explicit HTK mel
// filter construction) and stays independent of the library's FFT/filterbank
// code paths.

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

constexpr double kPi = 3.14159265358979323846264338327950288;

// Direct DFT magnitude of a real signal zero-padded to fft_size (first
// fft_size/2 + 1 bins).
inline std::vector<double> dft_magnitude(const std::vector<double>& x, int fft_size) {
  std::vector<double> mag(fft_size / 2 + 1, 0.0);
  for (int k = 0; k <= fft_size / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double ang = -2.0 * kPi * k * static_cast<double>(n) / fft_size;
      re += x[n] * std::cos(ang);
      im += x[n] * std::sin(ang);
    }
    mag[k] = std::sqrt(re * re + im * im);
  }
  return mag;
}

inline double htk_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double htk_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Centre frequency of mel filter m (0-based) for 64 filters spanning 0-8000 Hz.
inline double mel_center_freq(int m, int num_filters = 64) {
  const double lo = htk_mel(0.0), hi = htk_mel(8000.0);
  return htk_hz(lo + (hi - lo) * (m + 1) / (num_filters + 1));
}

// Independent 64-bin log-mel of one raw 400-sample frame: Hann window,
// 512-point direct DFT, triangular filters, natural log floored at 1e-10.
inline std::vector<double> log_mel(const std::vector<double>& frame) {
  const int frame_len = 400, fft_size = 512, num_filters = 64, sample_rate = 16000;
  std::vector<double> windowed(frame_len);
  for (int n = 0; n < frame_len; ++n) {
    windowed[n] = frame[n] * (0.5 - 0.5 * std::cos(2.0 * kPi * n / (frame_len - 1)));
  }
  const auto mag = dft_magnitude(windowed, fft_size);

  const double mel_lo = htk_mel(0.0), mel_hi = htk_mel(8000.0);
  std::vector<double> edges(num_filters + 2);
  for (int i = 0; i < num_filters + 2; ++i) {
    edges[i] = htk_hz(mel_lo + (mel_hi - mel_lo) * i / (num_filters + 1));
  }

  std::vector<double> out(num_filters, 0.0);
  for (int m = 0; m < num_filters; ++m) {
    double acc = 0.0;
    for (int k = 0; k <= fft_size / 2; ++k) {
      const double fk = static_cast<double>(k) * sample_rate / fft_size;
      double w = 0.0;
      if (fk > edges[m] && fk < edges[m + 1]) {
        w = (fk - edges[m]) / (edges[m + 1] - edges[m]);
      } else if (fk >= edges[m + 1] && fk < edges[m + 2]) {
        w = (edges[m + 2] - fk) / (edges[m + 2] - edges[m + 1]);
      }
      acc += w * mag[k];
    }
    out[m] = std::log(acc < 1e-10 ? 1e-10 : acc);
  }
  return out;
}

// Power of the DFT bin closest to freq_hz, via direct projection.
inline double tone_power(const std::vector<double>& x, double freq_hz, int sample_rate) {
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double ang = 2.0 * kPi * freq_hz * static_cast<double>(n) / sample_rate;
    re += x[n] * std::cos(ang);
    im += x[n] * std::sin(ang);
  }
  const double scale = 2.0 / static_cast<double>(x.size());
  re *= scale;
  im *= scale;
  return re * re + im * im;  // squared amplitude of the component
}

}  // namespace oracle
