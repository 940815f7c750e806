#pragma once

// Deterministic multi-speaker session generator, at two fidelities:
//
//  - event level: labeled utterance streams (speech, silence, optional
//    television distractor) with condition metadata, for routing and
//    ablation experiments;
//  - audio level: plane-wave multichannel synthesis of tone / band-noise
//    scenes, for front-end tests.
//
// Generation is a pure function of (spec, seed). Device-directed speech is
// attributed to one designated speaker; ambiguous utterances are always
// follow-ups placed within 8 seconds of a prior same-addressee utterance, so
// only the surrounding context distinguishes their labels. Device follow-ups
// chain (multi-turn interactions); person-directed utterances spawn at most
// one ambiguous follow-up each. Silence segments are emitted inside
// inter-burst gaps at a rate calibrated so the overall stream composition
// approaches 34% silent / 58% person / 8% device at the evaluation-set
// device fraction (0.12 of VAD-positive segments).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdar/rng.hpp"
#include "sdar/types.hpp"

namespace sdar {

inline constexpr double kSilenceShare = 0.34;  // target fraction of all segments
inline constexpr double kTvEventsPerHour = 25.0;
inline constexpr int kTvSpeakerId = -2;
inline constexpr int kSilenceSpeakerId = -1;

struct SessionSpec {
  int speakers_present = 2;                // 1..4 evaluated; 5+ allowed but flagged
  NoiseBand noise_band = NoiseBand::kLow;
  double duration_s = 3600.0;
  double device_fraction = 0.08;           // of VAD-positive segments
  double ambiguous_followup_rate = 0.3;
  bool tv_distractor = false;
  double segments_per_hour = 100.0;        // VAD-positive target rate
  std::uint64_t rng_seed = 0;
  std::string session_id;                  // derived from seed when empty

  void validate() const {
    if (speakers_present < 1) throw std::invalid_argument("sim: speakers_present must be >= 1");
    if (!(duration_s > 0.0)) throw std::invalid_argument("sim: duration_s must be > 0");
    if (!(device_fraction >= 0.0 && device_fraction <= 1.0)) {
      throw std::invalid_argument("sim: device_fraction must be in [0, 1]");
    }
    if (!(ambiguous_followup_rate >= 0.0 && ambiguous_followup_rate < 1.0)) {
      throw std::invalid_argument("sim: ambiguous_followup_rate must be in [0, 1)");
    }
    if (!(segments_per_hour > 0.0)) throw std::invalid_argument("sim: segments_per_hour must be > 0");
  }

  bool out_of_evaluated_range() const { return speakers_present > 4; }

  std::string effective_session_id() const {
    return session_id.empty() ? "s" + std::to_string(rng_seed) : session_id;
  }
};

struct UtteranceEvent {
  std::string id;
  std::string session_id;
  double t_start = 0.0;
  double t_end = 0.0;
  int speaker = 0;
  AddresseeLabel y_true = AddresseeLabel::kSilent;
  bool ambiguous = false;
  bool tv_origin = false;
  int speakers_present = 1;
  NoiseBand noise_band = NoiseBand::kLow;
  std::string scenario;  // empty unless injected by a failure scenario

  bool vad_positive() const { return y_true != AddresseeLabel::kSilent; }

  void validate() const {
    if (!(t_end > t_start)) throw std::invalid_argument("event " + id + ": end must be > start");
  }
};

namespace detail {

struct PendingEvent {
  double t_start, t_end;
  int speaker;
  AddresseeLabel label;
  bool ambiguous;
  bool tv_origin;
};

}  // namespace detail

inline std::vector<UtteranceEvent> generate_session(const SessionSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);

  const double r = spec.ambiguous_followup_rate;
  // Device bursts chain with probability r (expected length 1/(1-r)); person
  // bursts add one follow-up with probability r (expected length 1+r). The
  // base-arrival device probability is solved so the requested fraction
  // holds over emitted events, not base arrivals.
  const double dev_chain = 1.0 / (1.0 - r);
  const double per_chain = 1.0 + r;
  const double f = spec.device_fraction;
  const double f_base = f * per_chain / (dev_chain * (1.0 - f) + per_chain * f);
  const double mean_speech_per_base = f_base * dev_chain + (1.0 - f_base) * per_chain;

  const double mean_dur = 1.65;       // U[0.8, 2.5]
  const double mean_follow_gap = 2.4; // U[0.8, 4.0]
  const double burst_span = mean_speech_per_base * mean_dur +
                            std::max(0.0, mean_speech_per_base - 1.0) * mean_follow_gap;
  const double mean_gap = std::max(
      1.0, 3600.0 * mean_speech_per_base / spec.segments_per_hour - burst_span);

  // Silence segments are emitted into gaps longer than kMinSilenceGap;
  // compensate the emission probability for the gap-length gate so the
  // overall composition still hits the silence share.
  const double kMinSilenceGap = 0.4;
  const double p_gap_ok = std::exp(-kMinSilenceGap / mean_gap);
  const double p_silence = std::min(
      1.0, kSilenceShare / (1.0 - kSilenceShare) * mean_speech_per_base / p_gap_ok);

  std::vector<detail::PendingEvent> pending;
  double t = 0.0;
  while (true) {
    const double gap = rng.exponential(mean_gap);
    const bool emit_silence = rng.bernoulli(p_silence);
    if (emit_silence && gap > kMinSilenceGap) {
      const double dur = std::min(rng.uniform(1.0, 3.0), 0.45 * gap);
      const double start = t + 0.2 * gap;
      if (start + dur < spec.duration_s) {
        pending.push_back({start, start + dur, kSilenceSpeakerId, AddresseeLabel::kSilent,
                           false, false});
      }
    }
    t += gap;
    if (t >= spec.duration_s) break;

    const bool is_device = rng.bernoulli(f_base);
    const int speaker =
        is_device ? 0 : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                            spec.speakers_present)));
    double dur = rng.uniform(0.8, 2.5);
    if (t + dur >= spec.duration_s) break;
    pending.push_back({t, t + dur,
                       speaker,
                       is_device ? AddresseeLabel::kDeviceDirected
                                 : AddresseeLabel::kPersonDirected,
                       false, false});
    t += dur;

    if (is_device) {
      // Multi-turn interaction: chained ambiguous follow-up commands.
      while (rng.bernoulli(r)) {
        const double fgap = rng.uniform(0.8, 4.0);
        const double fdur = rng.uniform(0.8, 2.5);
        if (t + fgap + fdur >= spec.duration_s) break;
        t += fgap;
        pending.push_back({t, t + fdur, 0, AddresseeLabel::kDeviceDirected, true, false});
        t += fdur;
      }
    } else {
      // Side conversation: at most one ambiguous follow-up remark.
      if (rng.bernoulli(r)) {
        const double fgap = rng.uniform(0.8, 4.0);
        const double fdur = rng.uniform(0.8, 2.5);
        if (t + fgap + fdur < spec.duration_s) {
          t += fgap;
          pending.push_back({t, t + fdur, speaker, AddresseeLabel::kPersonDirected, true, false});
          t += fdur;
        }
      }
    }
  }

  if (spec.tv_distractor) {
    double tv_t = rng.uniform(0.0, 20.0);
    const double tv_mean_gap = 3600.0 / kTvEventsPerHour;
    while (true) {
      const double dur = rng.uniform(1.5, 4.0);
      if (tv_t + dur >= spec.duration_s) break;
      pending.push_back({tv_t, tv_t + dur, kTvSpeakerId, AddresseeLabel::kPersonDirected,
                         false, true});
      tv_t += dur + rng.exponential(tv_mean_gap);
    }
  }

  // Stream order is decision order: the gate scores each utterance at its
  // end, so overlapping events are emitted by ascending end time.
  std::stable_sort(pending.begin(), pending.end(),
                   [](const auto& a, const auto& b) { return a.t_end < b.t_end; });

  const std::string sid = spec.effective_session_id();
  std::vector<UtteranceEvent> events;
  events.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    const auto& p = pending[i];
    UtteranceEvent e;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "-e%05zu", i);
    e.id = sid + idbuf;
    e.session_id = sid;
    e.t_start = p.t_start;
    e.t_end = p.t_end;
    e.speaker = p.speaker;
    e.y_true = p.label;
    e.ambiguous = p.ambiguous;
    e.tv_origin = p.tv_origin;
    e.speakers_present = spec.speakers_present;
    e.noise_band = spec.noise_band;
    events.push_back(std::move(e));
  }
  return events;
}

// ---------------------------------------------------------------------------
// Failure scenarios
// ---------------------------------------------------------------------------

enum class FailureScenario { kTvInterrogative, kCarryOver, kOverlapCommand };

inline FailureScenario scenario_from_string(const std::string& s) {
  if (s == "tv_interrogative") return FailureScenario::kTvInterrogative;
  if (s == "carry_over") return FailureScenario::kCarryOver;
  if (s == "overlap_command") return FailureScenario::kOverlapCommand;
  throw std::invalid_argument("sim: unknown scenario: " + s);
}

inline const char* to_string(FailureScenario s) {
  switch (s) {
    case FailureScenario::kTvInterrogative: return "tv_interrogative";
    case FailureScenario::kCarryOver: return "carry_over";
    case FailureScenario::kOverlapCommand: return "overlap_command";
  }
  return "?";
}

// Inserts scenario events marked with the scenario name; existing event ids
// are preserved so decision streams stay joinable.
inline std::vector<UtteranceEvent> inject_failure_scenario(std::vector<UtteranceEvent> events,
                                                           FailureScenario scenario,
                                                           std::uint64_t seed) {
  if (events.empty()) throw std::invalid_argument("sim: cannot inject into an empty stream");
  Rng rng(seed ^ 0x5ca1ab1eULL);
  const std::string sid = events.front().session_id;
  const int speakers = events.front().speakers_present;
  const NoiseBand noise = events.front().noise_band;
  double span_end = 0.0;
  for (const auto& e : events) span_end = std::max(span_end, e.t_end);

  std::vector<UtteranceEvent> injected;
  auto make_event = [&](double start, double end, int speaker, AddresseeLabel label,
                        bool ambiguous, bool tv) {
    UtteranceEvent e;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "-x%s%03zu", to_string(scenario), injected.size());
    e.id = sid + idbuf;
    e.session_id = sid;
    e.t_start = start;
    e.t_end = end;
    e.speaker = speaker;
    e.y_true = label;
    e.ambiguous = ambiguous;
    e.tv_origin = tv;
    e.speakers_present = speakers;
    e.noise_band = noise;
    e.scenario = to_string(scenario);
    injected.push_back(e);
  };

  auto overlaps_speaker = [&](int speaker, double start, double end) {
    for (const auto& e : events) {
      if (e.speaker == speaker && start < e.t_end && e.t_start < end) return true;
    }
    for (const auto& e : injected) {
      if (e.speaker == speaker && start < e.t_end && e.t_start < end) return true;
    }
    return false;
  };

  switch (scenario) {
    case FailureScenario::kTvInterrogative: {
      // Television dialogue with device-like prosody, overlapping freely.
      double tv_t = rng.uniform(2.0, 20.0);
      const double mean_gap = 3600.0 / kTvEventsPerHour;
      while (true) {
        const double dur = rng.uniform(1.5, 4.0);
        if (tv_t + dur >= span_end) break;
        make_event(tv_t, tv_t + dur, kTvSpeakerId, AddresseeLabel::kPersonDirected, false, true);
        tv_t += dur + rng.exponential(mean_gap);
      }
      break;
    }
    case FailureScenario::kCarryOver: {
      // Device turn, then the user turns to another person within 2 s with a
      // follow-up-shaped remark; residual context invites a false forward.
      const int carry_speaker = speakers;  // an extra nearby person
      for (const auto& e : events) {
        if (e.y_true != AddresseeLabel::kDeviceDirected || e.ambiguous) continue;
        if (!rng.bernoulli(0.5)) continue;
        const double start = e.t_end + rng.uniform(0.5, 2.0);
        const double dur = rng.uniform(0.8, 2.0);
        if (start + dur >= span_end) continue;
        if (overlaps_speaker(carry_speaker, start, start + dur)) continue;
        make_event(start, start + dur, carry_speaker, AddresseeLabel::kPersonDirected, true,
                   false);
      }
      break;
    }
    case FailureScenario::kOverlapCommand: {
      // A genuine device command spoken during cross-talk; evidence degrades
      // to the ambiguous distribution.
      for (const auto& e : events) {
        if (e.y_true != AddresseeLabel::kPersonDirected || e.tv_origin || e.ambiguous) continue;
        if (e.t_end - e.t_start < 1.2) continue;
        if (!rng.bernoulli(0.25)) continue;
        const double start = e.t_start + 0.3 * (e.t_end - e.t_start);
        const double end = start + 0.6 * (e.t_end - e.t_start);
        if (overlaps_speaker(0, start, end)) continue;
        make_event(start, end, 0, AddresseeLabel::kDeviceDirected, true, false);
      }
      break;
    }
  }

  events.insert(events.end(), injected.begin(), injected.end());
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.t_end < b.t_end; });
  return events;
}

// ---------------------------------------------------------------------------
// Event stream JSON Lines
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const UtteranceEvent& e) {
  nlohmann::json j{
      {"id", e.id},
      {"session_id", e.session_id},
      {"t_start_s", e.t_start},
      {"t_end_s", e.t_end},
      {"speaker", e.speaker},
      {"y_true", static_cast<int>(e.y_true)},
      {"ambiguous", e.ambiguous},
      {"tv_origin", e.tv_origin},
      {"speakers_present", e.speakers_present},
      {"noise_band", to_string(e.noise_band)},
  };
  if (!e.scenario.empty()) j["scenario"] = e.scenario;
  return j;
}

inline UtteranceEvent event_from_json(const nlohmann::json& j) {
  UtteranceEvent e;
  e.id = j.at("id").get<std::string>();
  e.session_id = j.at("session_id").get<std::string>();
  e.t_start = j.at("t_start_s").get<double>();
  e.t_end = j.at("t_end_s").get<double>();
  e.speaker = j.at("speaker").get<int>();
  e.y_true = label_from_int(j.at("y_true").get<int>());
  e.ambiguous = j.at("ambiguous").get<bool>();
  e.tv_origin = j.at("tv_origin").get<bool>();
  e.speakers_present = j.at("speakers_present").get<int>();
  e.noise_band = noise_band_from_string(j.at("noise_band").get<std::string>());
  e.scenario = j.value("scenario", std::string{});
  e.validate();
  return e;
}

inline void write_events_jsonl(const std::vector<UtteranceEvent>& events,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("sim: cannot write " + path);
  for (const auto& e : events) out << to_json(e).dump() << "\n";
}

inline std::vector<UtteranceEvent> read_events_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("sim: cannot open " + path);
  std::vector<UtteranceEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      events.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error("sim: parse error at " + path + ":" + std::to_string(lineno) +
                               ": " + ex.what());
    }
  }
  return events;
}

// ---------------------------------------------------------------------------
// Audio-level scenes
// ---------------------------------------------------------------------------

struct SignalComponent {
  enum class Kind { kTone, kBandNoise } kind = Kind::kTone;
  double freq_hz = 1000.0;   // tone
  double band_lo_hz = 200.0;  // band noise
  double band_hi_hz = 3400.0;
  double amplitude = 0.1;    // peak for tones, RMS for band noise
  double t_on = 0.0;
  double t_off = 1e9;
};

struct SceneSource {
  std::array<double, 3> position{0.0, 1.0, 0.0};  // meters
  std::vector<SignalComponent> components;
};

struct AudioScene {
  std::vector<SceneSource> sources;
  std::vector<std::array<double, 3>> geometry;
  double noise_floor_amplitude = 0.0;  // white noise sigma per channel
  std::uint64_t rng_seed = 0;
};

// Places a source at the given azimuth (degrees from broadside, +x positive)
// and range, in the x-y plane.
inline std::array<double, 3> source_at_azimuth(double azimuth_deg, double range_m = 10.0) {
  const double a = azimuth_deg * 3.14159265358979323846 / 180.0;
  return {range_m * std::sin(a), range_m * std::cos(a), 0.0};
}

// Renders the scene with exact per-channel plane-wave delays (components are
// evaluated analytically, so fractional delays introduce no interpolation
// error). Output is a sequence of 1-second blocks at 16 kHz.
inline std::vector<MultichannelFrame> render_audio(const AudioScene& scene, double duration_s) {
  if (scene.sources.empty()) throw std::invalid_argument("render_audio: scene needs >= 1 source");
  if (scene.geometry.empty()) throw std::invalid_argument("render_audio: empty geometry");

  const std::size_t channels = scene.geometry.size();
  const auto total = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));

  double cx = 0.0, cy = 0.0;
  for (const auto& p : scene.geometry) {
    cx += p[0];
    cy += p[1];
  }
  cx /= static_cast<double>(channels);
  cy /= static_cast<double>(channels);

  Rng rng(scene.rng_seed);
  const double two_pi = 6.28318530717958647692;

  // Expand band-noise components into fixed sinusoid banks.
  struct Partial {
    double freq, amp, phase, t_on, t_off;
  };
  std::vector<std::vector<Partial>> partials(scene.sources.size());
  for (std::size_t s = 0; s < scene.sources.size(); ++s) {
    for (const auto& comp : scene.sources[s].components) {
      if (comp.kind == SignalComponent::Kind::kTone) {
        partials[s].push_back({comp.freq_hz, comp.amplitude, 0.0, comp.t_on, comp.t_off});
      } else {
        // Dense sinusoid bank (~12 Hz spacing) so the band reads as noise
        // with full spectral coverage, while per-channel delays stay exact.
        const int count = std::max(32, static_cast<int>((comp.band_hi_hz - comp.band_lo_hz) / 12.0));
        const double amp = comp.amplitude * std::sqrt(2.0 / count);
        for (int i = 0; i < count; ++i) {
          partials[s].push_back({rng.uniform(comp.band_lo_hz, comp.band_hi_hz), amp,
                                 rng.uniform(0.0, two_pi), comp.t_on, comp.t_off});
        }
      }
    }
  }

  // Per-source, per-channel arrival offsets.
  std::vector<std::vector<double>> delays(scene.sources.size(), std::vector<double>(channels));
  for (std::size_t s = 0; s < scene.sources.size(); ++s) {
    const auto& pos = scene.sources[s].position;
    const double dx = pos[0] - cx, dy = pos[1] - cy;
    const double norm = std::sqrt(dx * dx + dy * dy);
    const double sx = norm > 0.0 ? dx / norm : 0.0;
    const double sy = norm > 0.0 ? dy / norm : 1.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const auto& p = scene.geometry[ch];
      delays[s][ch] = -(sx * (p[0] - cx) + sy * (p[1] - cy)) / kSpeedOfSound;
    }
  }

  std::vector<MultichannelFrame> blocks;
  std::size_t emitted = 0;
  while (emitted < total) {
    const std::size_t block_len = std::min<std::size_t>(kSampleRate, total - emitted);
    MultichannelFrame frame;
    frame.sample_rate = kSampleRate;
    frame.timestamp = static_cast<double>(emitted) / kSampleRate;
    frame.samples.assign(channels, std::vector<double>(block_len, 0.0));
    for (std::size_t ch = 0; ch < channels; ++ch) {
      for (std::size_t n = 0; n < block_len; ++n) {
        const double tt = static_cast<double>(emitted + n) / kSampleRate;
        double v = 0.0;
        for (std::size_t s = 0; s < scene.sources.size(); ++s) {
          const double ts = tt - delays[s][ch];
          for (const auto& p : partials[s]) {
            if (ts >= p.t_on && ts < p.t_off) {
              v += p.amp * std::sin(two_pi * p.freq * ts + p.phase);
            }
          }
        }
        if (scene.noise_floor_amplitude > 0.0) {
          v += scene.noise_floor_amplitude * rng.normal();
        }
        frame.samples[ch][n] = std::clamp(v, -1.0, 1.0);
      }
    }
    blocks.push_back(std::move(frame));
    emitted += block_len;
  }
  return blocks;
}

}  // namespace sdar
