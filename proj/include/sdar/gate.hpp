#pragma once

// Routing gate: VAD -> spatial front-end -> utterance scorer -> context
// modulation -> thresholded action, with fail-closed semantics. Forward
// happens only when the modulated confidence clears tau; anything between
// tau_suppress and tau abstains; at or below tau_suppress it suppresses.
// VAD-inactive segments suppress with label silent and never reach the
// scorer.
//
// Two pipeline flavours share the decision logic:
//  - EventPipeline consumes labeled simulator events and draws scorer
//    confidence from an evidence model;
//  - AudioPipeline consumes raw multichannel audio through the full DSP and
//    network path.
//
// The event path supports an oracle modulator that reads the generator's
// ground-truth interaction state (a device turn within the context horizon
// licenses ambiguous follow-ups). It stands in for the trained context
// model, which is not distributed; the rules baselines and the learned
// architecture run against it in ablations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdar/config.hpp"
#include "sdar/evidence.hpp"
#include "sdar/features.hpp"
#include "sdar/frontend.hpp"
#include "sdar/sim.hpp"
#include "sdar/stage2.hpp"
#include "sdar/stage3.hpp"

namespace sdar {

struct RoutingDecision {
  std::string utterance_id;
  RoutingAction action = RoutingAction::kSuppress;
  AddresseeLabel predicted_label = AddresseeLabel::kSilent;
  double raw_confidence = 0.0;        // scorer output c
  double alpha = 1.0;                 // context prior
  double modulated_confidence = 0.0;  // c' = alpha * c
  std::int64_t latency_us = 0;
};

struct PipelineStats {
  std::size_t decisions = 0;
  std::int64_t latency_median_us = 0;
  std::int64_t latency_p95_us = 0;
  std::size_t forwards = 0;
  std::size_t suppresses = 0;
  std::size_t abstains = 0;
};

// Thresholded action on a modulated confidence. Fail-closed: no path other
// than c' >= tau forwards.
inline RoutingDecision decide(double c_modulated, const VadState& vad,
                              const DeploymentConfig& cfg) {
  cfg.validate();
  RoutingDecision d;
  d.modulated_confidence = c_modulated;
  if (!vad.active) {
    d.action = RoutingAction::kSuppress;
    d.predicted_label = AddresseeLabel::kSilent;
    return d;
  }
  if (c_modulated >= cfg.tau) {
    d.action = RoutingAction::kForward;
    d.predicted_label = AddresseeLabel::kDeviceDirected;
  } else if (c_modulated <= cfg.tau_suppress) {
    d.action = RoutingAction::kSuppress;
    d.predicted_label = AddresseeLabel::kPersonDirected;
  } else {
    d.action = RoutingAction::kAbstain;  // uncertainty band, fail closed
    d.predicted_label = AddresseeLabel::kPersonDirected;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Modulator selection
// ---------------------------------------------------------------------------

enum class ModulatorKind { kNone, kOracle, kLearned, kEma, kKofN };

inline ModulatorKind modulator_from_string(const std::string& s) {
  if (s == "none") return ModulatorKind::kNone;
  if (s == "oracle") return ModulatorKind::kOracle;
  if (s == "learned") return ModulatorKind::kLearned;
  if (s == "ema") return ModulatorKind::kEma;
  if (s == "kofn") return ModulatorKind::kKofN;
  throw std::invalid_argument("gate: unknown modulator: " + s);
}

struct ModulatorConfig {
  ModulatorKind kind = ModulatorKind::kNone;
  const Stage3Network* network = nullptr;  // required for kLearned
  double ema_lambda = 0.6;
  int k = 2;
  int n = 4;
  double bar = 0.5;
};

// ---------------------------------------------------------------------------
// Event-level pipeline
// ---------------------------------------------------------------------------

struct EventPipelineOptions {
  bool stage1_active = true;        // spatial suppression of off-axis TV evidence
  bool stage2_active = true;        // false: fixed uninformative confidence 0.5
  ModulatorConfig modulator;
};

class EventPipeline {
 public:
  EventPipeline(const DeploymentConfig& cfg, const EvidenceModel& model,
                EventPipelineOptions options = {})
      : cfg_(cfg), model_(&model), opt_(options), window_(cfg.context_horizon_s) {
    cfg_.validate();
    if (opt_.modulator.kind == ModulatorKind::kLearned && !opt_.modulator.network) {
      throw std::invalid_argument("gate: learned modulator needs a network");
    }
  }

  RoutingDecision process(const UtteranceEvent& event) {
    const auto t0 = std::chrono::steady_clock::now();
    const double t = event.t_end;  // decision at utterance end
    if (last_event_time_.has_value() && t < *last_event_time_) {
      throw std::invalid_argument("gate: event stream time regression at " + event.id);
    }
    last_event_time_ = t;

    RoutingDecision d;
    d.utterance_id = event.id;

    VadState vad;
    vad.active = event.vad_positive();
    vad.energy_dbfs = vad.active ? cfg_.vad_energy_threshold_dbfs + 10.0
                                 : cfg_.vad_energy_threshold_dbfs - 40.0;

    if (!vad.active) {
      d = decide(0.0, vad, cfg_);
      d.utterance_id = event.id;
      d.raw_confidence = 0.0;
      d.alpha = 1.0;
      d.modulated_confidence = 0.0;
    } else {
      double c = 0.5;  // scorer removed: fixed uninformative confidence
      if (opt_.stage2_active) {
        c = evidence_sample(event, *model_, opt_.stage1_active).confidence;
        ++stage2_invocations_;
      }
      window_.advance(t);
      const ModulatorOutput mod = modulate(event, c, t);
      d = decide(mod.modulated_confidence, vad, cfg_);
      d.utterance_id = event.id;
      d.raw_confidence = c;
      d.alpha = mod.alpha;
      d.modulated_confidence = mod.modulated_confidence;

      const double dt = window_.empty() ? 0.0 : std::max(0.0, t - window_.last_time());
      window_.push(ContextTuple{c, true, dt}, t);
      if (event.y_true == AddresseeLabel::kDeviceDirected) last_true_device_end_ = t;
    }

    const auto t1 = std::chrono::steady_clock::now();
    d.latency_us = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
    ++decisions_;
    return d;
  }

  std::vector<RoutingDecision> process_stream(const std::vector<UtteranceEvent>& events) {
    std::vector<RoutingDecision> out;
    out.reserve(events.size());
    for (const auto& e : events) out.push_back(process(e));
    return out;
  }

  std::size_t stage2_invocations() const { return stage2_invocations_; }
  std::size_t decisions() const { return decisions_; }
  const ContextWindow& window() const { return window_; }

 private:
  ModulatorOutput modulate(const UtteranceEvent& event, double c, double now) {
    switch (opt_.modulator.kind) {
      case ModulatorKind::kNone:
        return {1.0, c};
      case ModulatorKind::kLearned:
        return modulate_learned(window_, c, now, *opt_.modulator.network);
      case ModulatorKind::kEma:
        return modulate_ema(window_, c, opt_.modulator.ema_lambda);
      case ModulatorKind::kKofN:
        return modulate_k_of_n(window_, c, opt_.modulator.k, opt_.modulator.n,
                               opt_.modulator.bar);
      case ModulatorKind::kOracle: {
        // Ground-truth interaction state: unambiguous utterances keep their
        // evidence; ambiguous follow-ups are licensed only by a true device
        // turn inside the context horizon. Uses only past events.
        double alpha = 1.0;
        if (event.ambiguous) {
          const bool device_context =
              last_true_device_end_.has_value() &&
              (event.t_start - *last_true_device_end_) <= cfg_.context_horizon_s &&
              *last_true_device_end_ <= event.t_start;
          alpha = device_context ? 1.0 : 0.0;
        }
        return {alpha, alpha * c};
      }
    }
    return {1.0, c};
  }

  DeploymentConfig cfg_;
  const EvidenceModel* model_;
  EventPipelineOptions opt_;
  ContextWindow window_;
  std::optional<double> last_event_time_;
  std::optional<double> last_true_device_end_;
  std::size_t stage2_invocations_ = 0;
  std::size_t decisions_ = 0;
};

// ---------------------------------------------------------------------------
// Audio-level pipeline
// ---------------------------------------------------------------------------

class AudioPipeline {
 public:
  AudioPipeline(const DeploymentConfig& cfg, const Stage2Network& net,
                ModulatorConfig modulator = {})
      : cfg_(cfg), net_(&net), modulator_(modulator), window_(cfg.context_horizon_s) {
    cfg_.validate();
    if (modulator_.kind == ModulatorKind::kOracle) {
      throw std::invalid_argument("gate: oracle modulator needs labeled events");
    }
    if (modulator_.kind == ModulatorKind::kLearned && !modulator_.network) {
      throw std::invalid_argument("gate: learned modulator needs a network");
    }
  }

  // One utterance of audio -> one routing decision.
  RoutingDecision process(const MultichannelFrame& audio, const std::string& utterance_id) {
    const auto t0 = std::chrono::steady_clock::now();
    audio.validate();

    // The deployment geometry decides the path: single-microphone deployments
    // bypass the spatial stage and run on channel 0.
    const MicArrayGeometry geometry = MicArrayGeometry::from_config(cfg_);
    BeamformedFrame mono;
    if (geometry.size() >= 2) {
      if (geometry.size() != audio.channel_count()) {
        throw std::invalid_argument("gate: audio channel count does not match mic geometry");
      }
      const DoaEstimate doa = estimate_doa(audio, geometry);
      mono = beamform(audio, geometry, doa.azimuth_deg);
    } else {
      mono = bypass(audio);
    }

    const double t = audio.timestamp + audio.duration();
    RoutingDecision d;
    d.utterance_id = utterance_id;

    const auto frames = frame_signal(mono.samples, mono.sample_rate);
    VadState vad{false, -100.0};
    for (const auto& fr : frames) {
      const VadState st = sdar::vad(fr, cfg_.vad_energy_threshold_dbfs);
      vad.energy_dbfs = std::max(vad.energy_dbfs, st.energy_dbfs);
      if (st.active) vad.active = true;
    }

    if (!vad.active || frames.empty()) {
      vad.active = false;
      d = decide(0.0, vad, cfg_);
      d.utterance_id = utterance_id;
    } else {
      std::vector<MelFeatureVector> feats;
      feats.reserve(frames.size());
      for (std::size_t f = 0; f < frames.size(); ++f) {
        MelFeatureVector v;
        v.values = log_mel(frames[f]);
        v.frame_index = static_cast<int>(f);
        v.timestamp = audio.timestamp + static_cast<double>(f * kFrameHop) / kSampleRate;
        feats.push_back(std::move(v));
      }
      const double c = net_->forward(feats);
      ++stage2_invocations_;
      window_.advance(t);
      const ModulatorOutput mod = modulate(c, t);
      d = decide(mod.modulated_confidence, vad, cfg_);
      d.utterance_id = utterance_id;
      d.raw_confidence = c;
      d.alpha = mod.alpha;
      d.modulated_confidence = mod.modulated_confidence;
      const double dt = window_.empty() ? 0.0 : std::max(0.0, t - window_.last_time());
      window_.push(ContextTuple{c, true, dt}, t);
    }

    const auto t1 = std::chrono::steady_clock::now();
    d.latency_us = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
    return d;
  }

  std::size_t stage2_invocations() const { return stage2_invocations_; }

 private:
  ModulatorOutput modulate(double c, double now) {
    switch (modulator_.kind) {
      case ModulatorKind::kNone:
        return {1.0, c};
      case ModulatorKind::kLearned:
        return modulate_learned(window_, c, now, *modulator_.network);
      case ModulatorKind::kEma:
        return modulate_ema(window_, c, modulator_.ema_lambda);
      case ModulatorKind::kKofN:
        return modulate_k_of_n(window_, c, modulator_.k, modulator_.n, modulator_.bar);
      default:
        return {1.0, c};
    }
  }

  DeploymentConfig cfg_;
  const Stage2Network* net_;
  ModulatorConfig modulator_;
  ContextWindow window_;
  std::size_t stage2_invocations_ = 0;
};

// ---------------------------------------------------------------------------
// Threshold selection
// ---------------------------------------------------------------------------

struct ScoredSegment {
  double c_prime = 0.0;
  bool is_device = false;
  bool vad_active = true;
};

enum class ThresholdPolicy { kCrossover, kMaxF1 };

// The operating grid used for threshold sweeps and curves.
inline std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  for (int i = 56; i <= 85; ++i) grid.push_back(static_cast<double>(i) / 100.0);
  return grid;
}

namespace detail {

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

inline Prf prf_at_tau(const std::vector<ScoredSegment>& segments, double tau) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& s : segments) {
    if (!s.vad_active) continue;
    const bool forward = s.c_prime >= tau;
    if (forward && s.is_device) ++tp;
    if (forward && !s.is_device) ++fp;
    if (!forward && s.is_device) ++fn;
  }
  Prf out;
  out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

}  // namespace detail

// Selects tau on a validation split. Crossover minimizes |P - R|; max_f1
// maximizes F1. Ties break toward the larger (more conservative) tau.
inline double select_threshold(const std::vector<std::vector<ScoredSegment>>& sessions,
                               ThresholdPolicy policy,
                               const std::vector<double>& grid = default_tau_grid()) {
  if (sessions.empty() || grid.empty()) {
    throw std::invalid_argument("select_threshold: need >= 1 session and a non-empty grid");
  }
  std::vector<ScoredSegment> pooled;
  bool any_positive = false;
  for (const auto& sess : sessions) {
    for (const auto& s : sess) {
      pooled.push_back(s);
      any_positive = any_positive || (s.is_device && s.vad_active);
    }
  }
  if (!any_positive) {
    throw std::invalid_argument("select_threshold: no positive labels in validation sessions");
  }

  double best_tau = grid.front();
  double best_score = -1e300;
  for (double tau : grid) {
    const auto prf = detail::prf_at_tau(pooled, tau);
    const double score =
        policy == ThresholdPolicy::kCrossover ? -std::abs(prf.precision - prf.recall) : prf.f1;
    if (score > best_score || (score == best_score && tau > best_tau)) {
      best_score = score;
      best_tau = tau;
    }
  }
  return best_tau;
}

// ---------------------------------------------------------------------------
// Latency bench
// ---------------------------------------------------------------------------

inline std::int64_t nearest_rank(std::vector<std::int64_t> values, double quantile) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

inline PipelineStats summarize(const std::vector<RoutingDecision>& decisions) {
  PipelineStats stats;
  stats.decisions = decisions.size();
  std::vector<std::int64_t> lat;
  lat.reserve(decisions.size());
  for (const auto& d : decisions) {
    lat.push_back(d.latency_us);
    switch (d.action) {
      case RoutingAction::kForward: ++stats.forwards; break;
      case RoutingAction::kSuppress: ++stats.suppresses; break;
      case RoutingAction::kAbstain: ++stats.abstains; break;
    }
  }
  stats.latency_median_us = nearest_rank(lat, 0.5);
  stats.latency_p95_us = nearest_rank(lat, 0.95);
  return stats;
}

inline PipelineStats bench(const std::vector<UtteranceEvent>& events,
                           const DeploymentConfig& cfg, const EvidenceModel& model,
                           EventPipelineOptions options = {}) {
  if (events.empty()) throw std::invalid_argument("bench: empty event stream");
  EventPipeline pipeline(cfg, model, options);
  return summarize(pipeline.process_stream(events));
}

// ---------------------------------------------------------------------------
// Decision stream JSON Lines
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const RoutingDecision& d, bool include_latency = true) {
  return nlohmann::json{
      {"utterance_id", d.utterance_id},
      {"action", to_string(d.action)},
      {"y_pred", static_cast<int>(d.predicted_label)},
      {"c", d.raw_confidence},
      {"alpha", d.alpha},
      {"c_prime", d.modulated_confidence},
      {"latency_us", include_latency ? d.latency_us : 0},
  };
}

inline RoutingDecision decision_from_json(const nlohmann::json& j) {
  RoutingDecision d;
  d.utterance_id = j.at("utterance_id").get<std::string>();
  d.action = action_from_string(j.at("action").get<std::string>());
  d.predicted_label = label_from_int(j.at("y_pred").get<int>());
  d.raw_confidence = j.at("c").get<double>();
  d.alpha = j.at("alpha").get<double>();
  d.modulated_confidence = j.at("c_prime").get<double>();
  d.latency_us = j.at("latency_us").get<std::int64_t>();
  return d;
}

// Timing is wall-clock and would break byte-reproducibility, so file output
// zeroes it unless explicitly requested; the bench command reports latency.
inline void write_decisions_jsonl(const std::vector<RoutingDecision>& decisions,
                                  const std::string& path, bool include_latency = false) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("gate: cannot write " + path);
  for (const auto& d : decisions) out << to_json(d, include_latency).dump() << "\n";
}

inline std::vector<RoutingDecision> read_decisions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("gate: cannot open " + path);
  std::vector<RoutingDecision> decisions;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      decisions.push_back(decision_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("gate: parse error at " + path + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return decisions;
}

}  // namespace sdar
