#pragma once

// Log-mel filterbank front-end and energy VAD.
//
// 16 kHz mono input, 25 ms frames with 10 ms hop. Each frame is Hann
// windowed, zero-padded to a 512-point FFT, and reduced to 64 triangular
// mel filters (HTK scale, 0-8000 Hz); filter outputs are floored at 1e-10
// before the natural log. The VAD measures frame energy on the raw samples.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sdar/fft.hpp"
#include "sdar/types.hpp"

namespace sdar {

inline constexpr int kFrameLength = 400;  // 25 ms at 16 kHz
inline constexpr int kFrameHop = 160;     // 10 ms
inline constexpr int kFftSize = 512;
inline constexpr int kNumMelBins = 64;
inline constexpr double kMelFloor = 1e-10;

struct MelFeatureVector {
  std::array<double, kNumMelBins> values{};
  int frame_index = 0;
  double timestamp = 0.0;
};

struct VadState {
  bool active = false;
  double energy_dbfs = -100.0;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Splits a mono signal into raw 400-sample frames, hop 160. The trailing
// partial frame is dropped; fewer than 400 samples gives no frames.
inline std::vector<std::vector<double>> frame_signal(const std::vector<double>& samples,
                                                     int sample_rate) {
  if (sample_rate != kSampleRate) {
    throw std::invalid_argument("frame_signal: sample rate must be 16000");
  }
  std::vector<std::vector<double>> frames;
  if (samples.size() < static_cast<std::size_t>(kFrameLength)) return frames;
  const std::size_t count = (samples.size() - kFrameLength) / kFrameHop + 1;
  frames.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    const std::size_t off = f * kFrameHop;
    frames.emplace_back(samples.begin() + off, samples.begin() + off + kFrameLength);
  }
  return frames;
}

inline const std::array<double, kFrameLength>& hann_window() {
  static const std::array<double, kFrameLength> w = [] {
    std::array<double, kFrameLength> win{};
    const double pi = 3.14159265358979323846;
    for (int n = 0; n < kFrameLength; ++n) {
      win[n] = 0.5 - 0.5 * std::cos(2.0 * pi * n / (kFrameLength - 1));
    }
    return win;
  }();
  return w;
}

// Triangular mel filterbank on the 257-bin magnitude spectrum. Built once.
class MelFilterbank {
 public:
  static const MelFilterbank& instance() {
    static const MelFilterbank fb;
    return fb;
  }

  std::array<double, kNumMelBins> apply(const std::vector<double>& magnitude) const {
    std::array<double, kNumMelBins> out{};
    for (int m = 0; m < kNumMelBins; ++m) {
      double acc = 0.0;
      for (int k = first_bin_[m]; k <= last_bin_[m]; ++k) {
        acc += weights_[m][k] * magnitude[k];
      }
      out[m] = acc;
    }
    return out;
  }

  double center_freq(int m) const { return centers_[m]; }

 private:
  MelFilterbank() {
    const int num_bins = kFftSize / 2 + 1;
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(8000.0);
    std::array<double, kNumMelBins + 2> edges{};
    for (int i = 0; i < kNumMelBins + 2; ++i) {
      edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (kNumMelBins + 1));
    }
    for (int m = 0; m < kNumMelBins; ++m) {
      centers_[m] = edges[m + 1];
      weights_[m].assign(num_bins, 0.0);
      first_bin_[m] = num_bins - 1;
      last_bin_[m] = 0;
      const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
      for (int k = 0; k < num_bins; ++k) {
        const double fk = static_cast<double>(k) * kSampleRate / kFftSize;
        double w = 0.0;
        if (fk > f0 && fk < f1) {
          w = (fk - f0) / (f1 - f0);
        } else if (fk >= f1 && fk < f2) {
          w = (f2 - fk) / (f2 - f1);
        }
        if (w > 0.0) {
          weights_[m][k] = w;
          if (k < first_bin_[m]) first_bin_[m] = k;
          if (k > last_bin_[m]) last_bin_[m] = k;
        }
      }
    }
  }

  std::array<std::vector<double>, kNumMelBins> weights_;
  std::array<int, kNumMelBins> first_bin_{};
  std::array<int, kNumMelBins> last_bin_{};
  std::array<double, kNumMelBins> centers_{};
};

// 64 log-mel energies of one raw 400-sample frame.
inline std::array<double, kNumMelBins> log_mel(const std::vector<double>& frame) {
  if (frame.size() != kFrameLength) {
    throw std::invalid_argument("log_mel: frame length must be 400");
  }
  const auto& win = hann_window();
  std::vector<double> windowed(kFrameLength);
  for (int n = 0; n < kFrameLength; ++n) windowed[n] = frame[n] * win[n];

  const auto spectrum = real_fft(windowed, kFftSize);
  std::vector<double> magnitude(kFftSize / 2 + 1);
  for (int k = 0; k <= kFftSize / 2; ++k) magnitude[k] = std::abs(spectrum[k]);

  auto energies = MelFilterbank::instance().apply(magnitude);
  for (auto& e : energies) e = std::log(e < kMelFloor ? kMelFloor : e);
  return energies;
}

// Frame energy in dBFS on the raw samples; active iff >= threshold.
inline VadState vad(const std::vector<double>& frame, double threshold_dbfs) {
  if (frame.size() != kFrameLength) {
    throw std::invalid_argument("vad: frame length must be 400");
  }
  double mean_sq = 0.0;
  for (double v : frame) mean_sq += v * v;
  mean_sq /= frame.size();
  const double energy = 10.0 * std::log10(mean_sq + 1e-10);
  return {energy >= threshold_dbfs, energy};
}

// Full feature pipeline for one utterance of mono audio.
inline std::vector<MelFeatureVector> compute_features(const std::vector<double>& samples,
                                                      double start_time = 0.0) {
  std::vector<MelFeatureVector> out;
  const auto frames = frame_signal(samples, kSampleRate);
  out.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    MelFeatureVector v;
    v.values = log_mel(frames[f]);
    v.frame_index = static_cast<int>(f);
    v.timestamp = start_time + static_cast<double>(f * kFrameHop) / kSampleRate;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace sdar
