#pragma once

// Acoustic-geometry front-end: GCC-PHAT time-difference estimation,
// direction-of-arrival from pairwise delays, and delay-and-sum beamforming
// with a cosine off-axis roll-off. Single-microphone input bypasses all of
// this and passes channel 0 through unchanged.
//
// Conventions: far-field plane waves, speed of sound 343 m/s. The TDOA of a
// channel pair (a, b) is the arrival time at b minus the arrival time at a,
// so a positive value means the source is nearer microphone a. Azimuth is
// measured in degrees from the array broadside, positive toward the first
// microphone of the pair axis.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "sdar/config.hpp"
#include "sdar/fft.hpp"
#include "sdar/types.hpp"

namespace sdar {

struct MicArrayGeometry {
  std::vector<std::array<double, 3>> positions;  // meters

  static MicArrayGeometry from_config(const DeploymentConfig& cfg) {
    return MicArrayGeometry{cfg.mic_geometry};
  }

  std::size_t size() const { return positions.size(); }

  double spacing(std::size_t a, std::size_t b) const {
    const auto& pa = positions[a];
    const auto& pb = positions[b];
    const double dx = pa[0] - pb[0], dy = pa[1] - pb[1], dz = pa[2] - pb[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }

  void validate_for_beamforming() const {
    if (positions.size() < 2) {
      throw std::invalid_argument("beamforming requires >= 2 mics");
    }
    for (std::size_t a = 0; a < positions.size(); ++a) {
      for (std::size_t b = a + 1; b < positions.size(); ++b) {
        if (spacing(a, b) <= 0.0) {
          throw std::invalid_argument("geometry: coincident microphone positions");
        }
      }
    }
  }
};

struct DoaEstimate {
  double azimuth_deg = 0.0;
  double confidence = 0.0;            // normalized cross-correlation peak
  std::vector<double> pair_tdoas_s;   // one per evaluated channel pair
};

struct BeamformedFrame {
  int sample_rate = kSampleRate;
  double timestamp = 0.0;
  std::vector<double> samples;
  DoaEstimate doa;
  double off_axis_gain = 1.0;
};

struct TdoaResult {
  double tdoa_s = 0.0;
  double confidence = 0.0;
  bool clamped = false;  // peak sat at the physical delay limit
};

namespace detail {

inline double channel_energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace detail

// GCC-PHAT delay estimate between two channels, sub-sample resolution via
// parabolic interpolation of the correlation peak. The search window is
// bounded by the physically possible delay for the given spacing.
inline TdoaResult estimate_tdoa_pair(const std::vector<double>& ch_a,
                                     const std::vector<double>& ch_b,
                                     int sample_rate, double spacing_m) {
  if (ch_a.size() != ch_b.size() || ch_a.empty()) {
    throw std::invalid_argument("estimate_tdoa: channels must be equal non-empty length");
  }
  const double max_delay_s = spacing_m / kSpeedOfSound;
  const int max_lag = static_cast<int>(std::ceil(max_delay_s * sample_rate)) + 1;
  if (static_cast<int>(ch_a.size()) < 2 * max_lag) {
    throw std::invalid_argument("estimate_tdoa: frame shorter than twice the maximum delay");
  }
  // Degenerate all-zero input: flagged zero-confidence estimate, not an error.
  if (detail::channel_energy(ch_a) < 1e-20 || detail::channel_energy(ch_b) < 1e-20) {
    return {0.0, 0.0, false};
  }

  const std::size_t fft_len = next_pow2(2 * ch_a.size());
  auto xa = real_fft(ch_a, fft_len);
  auto xb = real_fft(ch_b, fft_len);
  std::vector<std::complex<double>> cross(fft_len);
  double max_mag = 0.0;
  for (std::size_t k = 0; k < fft_len; ++k) {
    cross[k] = xa[k] * std::conj(xb[k]);
    max_mag = std::max(max_mag, std::abs(cross[k]));
  }
  // Phase transform with a magnitude gate: bins carrying no signal energy
  // would otherwise contribute unit-weight numerical noise.
  const double floor_mag = std::max(1e-12, 1e-3 * max_mag);
  std::size_t active_bins = 0;
  for (std::size_t k = 0; k < fft_len; ++k) {
    const double mag = std::abs(cross[k]);
    if (mag > floor_mag) {
      cross[k] /= mag;
      ++active_bins;
    } else {
      cross[k] = {0.0, 0.0};
    }
  }
  if (active_bins == 0) return {0.0, 0.0, false};
  fft(cross, true);
  // A pure coherent delay puts all active-bin weight into one lag; normalize
  // the peak by that mass so confidence reads as peak coherence.
  const double peak_norm = static_cast<double>(fft_len) / static_cast<double>(active_bins);

  auto corr_at = [&](int lag) {
    const std::size_t idx = static_cast<std::size_t>((lag + static_cast<int>(fft_len)) %
                                                     static_cast<int>(fft_len));
    return cross[idx].real();
  };

  int best_lag = 0;
  double best_val = corr_at(0);
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const double v = corr_at(lag);
    if (v > best_val) {
      best_val = v;
      best_lag = lag;
    }
  }

  // Parabolic refinement on the peak and its neighbours.
  const double ym = corr_at(best_lag - 1);
  const double y0 = corr_at(best_lag);
  const double yp = corr_at(best_lag + 1);
  const double denom = ym - 2.0 * y0 + yp;
  double delta = 0.0;
  if (std::abs(denom) > 1e-18) {
    delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
  }

  // Correlation peaks at lag = -D when channel b lags a by D samples;
  // report tdoa = +D/fs for a lagging b.
  double tdoa = -(static_cast<double>(best_lag) + delta) / sample_rate;
  bool clamped = false;
  if (std::abs(tdoa) > max_delay_s) {
    tdoa = std::copysign(max_delay_s, tdoa);
    clamped = true;
  }
  return {tdoa, std::clamp(best_val * peak_norm, 0.0, 1.0), clamped};
}

inline TdoaResult estimate_tdoa(const MultichannelFrame& frame, std::size_t a, std::size_t b,
                                const MicArrayGeometry& geometry) {
  if (a == b || a >= frame.channel_count() || b >= frame.channel_count()) {
    throw std::invalid_argument("estimate_tdoa: invalid channel pair");
  }
  return estimate_tdoa_pair(frame.samples[a], frame.samples[b], frame.sample_rate,
                            geometry.spacing(a, b));
}

// Direction of arrival from all channel pairs. Two-microphone arrays reduce
// to azimuth = asin(clamp(tdoa * c / d)); larger arrays combine the pairwise
// delays by least squares on the in-plane source direction.
inline DoaEstimate estimate_doa(const MultichannelFrame& frame, const MicArrayGeometry& geometry) {
  geometry.validate_for_beamforming();
  if (geometry.size() != frame.channel_count()) {
    throw std::invalid_argument("estimate_doa: geometry/channel count mismatch");
  }

  DoaEstimate est;
  double conf_sum = 0.0;
  bool any_clamped = false;

  // Accumulate normal equations for s = (sx, sy) with rows (p_a - p_b).
  double axx = 0.0, axy = 0.0, ayy = 0.0, bx = 0.0, by = 0.0;
  std::size_t pair_count = 0;
  for (std::size_t a = 0; a < geometry.size(); ++a) {
    for (std::size_t b = a + 1; b < geometry.size(); ++b) {
      const TdoaResult r = estimate_tdoa(frame, a, b, geometry);
      est.pair_tdoas_s.push_back(r.tdoa_s);
      conf_sum += r.confidence;
      any_clamped = any_clamped || r.clamped;
      const double rx = geometry.positions[a][0] - geometry.positions[b][0];
      const double ry = geometry.positions[a][1] - geometry.positions[b][1];
      const double rhs = kSpeedOfSound * r.tdoa_s;
      axx += rx * rx;
      axy += rx * ry;
      ayy += ry * ry;
      bx += rx * rhs;
      by += ry * rhs;
      ++pair_count;
    }
  }

  double sx = 0.0, sy = 0.0;
  const double det = axx * ayy - axy * axy;
  const double trace = axx + ayy;
  if (trace <= 0.0) {
    throw std::invalid_argument("estimate_doa: degenerate geometry");
  }
  if (det > 1e-9 * trace * trace) {
    sx = (ayy * bx - axy * by) / det;
    sy = (axx * by - axy * bx) / det;
    const double norm = std::sqrt(sx * sx + sy * sy);
    if (norm > 1.0) {
      sx /= norm;
      sy /= norm;
      any_clamped = true;
    }
  } else {
    // Collinear array: solve along the common axis, complete to unit norm
    // on the broadside component.
    double ux, uy;
    if (axx >= ayy) {
      ux = 1.0;
      uy = axy / (axx > 0.0 ? axx : 1.0);
    } else {
      ux = axy / (ayy > 0.0 ? ayy : 1.0);
      uy = 1.0;
    }
    const double ul = std::sqrt(ux * ux + uy * uy);
    ux /= ul;
    uy /= ul;
    const double denom = axx * ux * ux + 2.0 * axy * ux * uy + ayy * uy * uy;
    double s_axis = denom > 0.0 ? (bx * ux + by * uy) / denom : 0.0;
    if (std::abs(s_axis) > 1.0) {
      s_axis = std::copysign(1.0, s_axis);
      any_clamped = true;
    }
    const double s_broad = std::sqrt(std::max(0.0, 1.0 - s_axis * s_axis));
    // Broadside direction perpendicular to the axis, oriented toward +y.
    double px = -uy, py = ux;
    if (py < 0.0) {
      px = -px;
      py = -py;
    }
    sx = s_axis * ux + s_broad * px;
    sy = s_axis * uy + s_broad * py;
  }

  est.azimuth_deg = std::atan2(sx, sy) * 180.0 / 3.14159265358979323846;
  est.confidence = pair_count > 0 ? conf_sum / static_cast<double>(pair_count) : 0.0;
  if (any_clamped) est.confidence *= 0.5;
  return est;
}

namespace detail {

// Fractional shift by linear interpolation: y(n) = x(n - shift), zero edges.
inline std::vector<double> delay_linear(const std::vector<double>& x, double shift) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double pos = static_cast<double>(n) - shift;
    const double fl = std::floor(pos);
    const auto i0 = static_cast<long>(fl);
    const double frac = pos - fl;
    const long i1 = i0 + 1;
    double v = 0.0;
    if (i0 >= 0 && i0 < static_cast<long>(x.size())) v += (1.0 - frac) * x[i0];
    if (i1 >= 0 && i1 < static_cast<long>(x.size())) v += frac * x[i1];
    y[n] = v;
  }
  return y;
}

inline double off_axis_gain(double delta_deg) {
  constexpr double kPassDeg = 20.0;
  constexpr double kFloor = 0.2;
  const double d = std::abs(delta_deg);
  if (d <= kPassDeg) return 1.0;
  const double t = std::min((d - kPassDeg) / (90.0 - kPassDeg), 1.0);
  return kFloor + (1.0 - kFloor) * std::cos(t * 3.14159265358979323846 / 2.0);
}

inline double wrap_angle_deg(double a) {
  while (a >= 180.0) a -= 360.0;
  while (a < -180.0) a += 360.0;
  return a;
}

}  // namespace detail

// Delay-and-sum toward the steer azimuth. The output carries the dominant
// source estimate and the off-axis gain that was applied to it.
inline BeamformedFrame beamform(const MultichannelFrame& frame, const MicArrayGeometry& geometry,
                                double steer_azimuth_deg) {
  geometry.validate_for_beamforming();
  if (geometry.size() != frame.channel_count()) {
    throw std::invalid_argument("beamform: geometry/channel count mismatch");
  }
  frame.validate();

  const double pi = 3.14159265358979323846;
  const double az = steer_azimuth_deg * pi / 180.0;
  const double sx = std::sin(az), sy = std::cos(az);

  double cx = 0.0, cy = 0.0, cz = 0.0;
  for (const auto& p : geometry.positions) {
    cx += p[0];
    cy += p[1];
    cz += p[2];
  }
  cx /= geometry.size();
  cy /= geometry.size();
  (void)cz;

  BeamformedFrame out;
  out.sample_rate = frame.sample_rate;
  out.timestamp = frame.timestamp;
  out.samples.assign(frame.length(), 0.0);

  for (std::size_t ch = 0; ch < frame.channel_count(); ++ch) {
    const auto& p = geometry.positions[ch];
    const double proj = sx * (p[0] - cx) + sy * (p[1] - cy);
    const double shift = frame.sample_rate * proj / kSpeedOfSound;
    const auto aligned = detail::delay_linear(frame.samples[ch], shift);
    for (std::size_t n = 0; n < aligned.size(); ++n) out.samples[n] += aligned[n];
  }
  const double inv = 1.0 / static_cast<double>(frame.channel_count());
  for (auto& v : out.samples) v *= inv;

  out.doa = estimate_doa(frame, geometry);
  out.off_axis_gain =
      detail::off_axis_gain(detail::wrap_angle_deg(out.doa.azimuth_deg - steer_azimuth_deg));
  for (auto& v : out.samples) v *= out.off_axis_gain;
  return out;
}

// Single-microphone path: channel 0 unchanged, zero-confidence estimate.
inline BeamformedFrame bypass(const MultichannelFrame& frame) {
  frame.validate();
  BeamformedFrame out;
  out.sample_rate = frame.sample_rate;
  out.timestamp = frame.timestamp;
  out.samples = frame.samples[0];
  out.doa = DoaEstimate{0.0, 0.0, {}};
  out.off_axis_gain = 1.0;
  return out;
}

}  // namespace sdar
