#pragma once

// Shared domain types for the routing engine.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdar {

inline constexpr int kSampleRate = 16000;
inline constexpr double kSpeedOfSound = 343.0;  // m/s

// Addressee of a segment: silent / person-directed / device-directed.
enum class AddresseeLabel : int {
  kSilent = 0,
  kPersonDirected = 1,
  kDeviceDirected = 2,
};

// Routing action taken on a segment.
enum class RoutingAction : int {
  kForward = 0,
  kSuppress = 1,
  kAbstain = 2,
};

// Ambient noise-floor band a session was generated under.
enum class NoiseBand : int {
  kLow = 0,   // 28-50 dBA
  kMed = 1,   // 50-70 dBA
  kHigh = 2,  // 70-85 dBA
};

inline const char* to_string(NoiseBand band) {
  switch (band) {
    case NoiseBand::kLow: return "low";
    case NoiseBand::kMed: return "med";
    case NoiseBand::kHigh: return "high";
  }
  return "?";
}

inline NoiseBand noise_band_from_string(const std::string& s) {
  if (s == "low") return NoiseBand::kLow;
  if (s == "med") return NoiseBand::kMed;
  if (s == "high") return NoiseBand::kHigh;
  throw std::invalid_argument("NoiseBand: unknown band: " + s);
}

inline const char* to_string(AddresseeLabel label) {
  switch (label) {
    case AddresseeLabel::kSilent: return "silent";
    case AddresseeLabel::kPersonDirected: return "person";
    case AddresseeLabel::kDeviceDirected: return "device";
  }
  return "?";
}

inline const char* to_string(RoutingAction action) {
  switch (action) {
    case RoutingAction::kForward: return "forward";
    case RoutingAction::kSuppress: return "suppress";
    case RoutingAction::kAbstain: return "abstain";
  }
  return "?";
}

inline AddresseeLabel label_from_int(int v) {
  if (v < 0 || v > 2) throw std::invalid_argument("AddresseeLabel: value out of range: " + std::to_string(v));
  return static_cast<AddresseeLabel>(v);
}

inline RoutingAction action_from_string(const std::string& s) {
  if (s == "forward") return RoutingAction::kForward;
  if (s == "suppress") return RoutingAction::kSuppress;
  if (s == "abstain") return RoutingAction::kAbstain;
  throw std::invalid_argument("RoutingAction: unknown action: " + s);
}

// A block of multichannel audio. All channels have equal length and
// amplitudes in [-1, 1]; timestamp is seconds from session start.
struct MultichannelFrame {
  int sample_rate = kSampleRate;
  double timestamp = 0.0;
  std::vector<std::vector<double>> samples;  // [channel][sample]

  std::size_t channel_count() const { return samples.size(); }
  std::size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration() const { return static_cast<double>(length()) / sample_rate; }

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("MultichannelFrame: no channels");
    const std::size_t len = samples[0].size();
    if (len == 0) throw std::invalid_argument("MultichannelFrame: empty frame");
    for (const auto& ch : samples) {
      if (ch.size() != len) throw std::invalid_argument("MultichannelFrame: channel length mismatch");
      for (double v : ch) {
        if (!(v >= -1.0 && v <= 1.0)) {
          throw std::invalid_argument("MultichannelFrame: amplitude outside [-1, 1]");
        }
      }
    }
  }
};

}  // namespace sdar
