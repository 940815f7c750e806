#pragma once

// Evaluation harness: session-macro precision/recall/F1 on device-directed
// forwarding, segment-level confusion, PR sweeps over the operating grid,
// bootstrap confidence intervals, inter-annotator kappa, calibration/ECE,
// the stage-ablation runner, and the downstream cost model.
//
// Conventions: precision is 0 when nothing was forwarded and F1 is 0 when
// P + R is 0. Sessions without any device-directed segment are excluded from
// the macro averages (they still count toward the false-trigger rate and the
// confusion matrix). The confusion matrix is segment-level row-percent while
// P/R/F1 are session-macro, so the two are not directly comparable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sdar/gate.hpp"
#include "sdar/rng.hpp"
#include "sdar/sim.hpp"

namespace sdar {

// ---------------------------------------------------------------------------
// Bounded parallel map; SDAR_THREADS caps the worker count.
// ---------------------------------------------------------------------------

inline unsigned sdar_thread_cap() {
  if (const char* env = std::getenv("SDAR_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : std::min(hw, 8u);
}

inline void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::min<std::size_t>(sdar_thread_cap(), jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < jobs; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct PrfValues {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t segments = 0;
};

struct MetricsReport {
  double precision = 0.0;  // session-macro on device-directed forwarding
  double recall = 0.0;
  double f1 = 0.0;
  double micro_precision = 0.0;  // pooled across sessions
  double micro_recall = 0.0;
  double false_trigger_rate = 0.0;
  std::array<std::array<double, 3>, 3> confusion{};  // row-percent, rows = true label
  std::map<std::pair<int, NoiseBand>, PrfValues> per_condition;
  std::map<int, PrfValues> per_speaker;  // by speakers present, pooled
  std::pair<double, double> ci{0.0, 0.0};  // bootstrap 95% on macro F1
  std::vector<double> session_f1;          // sessions entering the macro average
  std::size_t sessions_total = 0;
};

inline double f1_of(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Percentile bootstrap over per-session values, deterministic per seed.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                              int resamples = 1000,
                                              std::uint64_t seed = 12345) {
  if (values.empty()) throw std::invalid_argument("bootstrap_ci: need >= 1 session value");
  Rng rng(seed);
  std::vector<double> means(resamples, 0.0);
  for (int r = 0; r < resamples; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      acc += values[rng.uniform_int(values.size())];
    }
    means[r] = acc / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - std::floor(pos);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  return {quantile(0.025), quantile(0.975)};
}

inline MetricsReport score_decisions(const std::vector<RoutingDecision>& decisions,
                                     const std::vector<UtteranceEvent>& truth,
                                     int bootstrap_resamples = 1000,
                                     std::uint64_t bootstrap_seed = 12345) {
  std::map<std::string, const UtteranceEvent*> by_id;
  for (const auto& e : truth) by_id[e.id] = &e;

  struct SessionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, device = 0, total = 0;
  };
  std::map<std::string, SessionCounts> sessions;
  std::map<std::pair<int, NoiseBand>, SessionCounts> conditions;
  std::map<int, SessionCounts> speaker_counts;
  std::array<std::array<std::size_t, 3>, 3> confusion_counts{};
  std::size_t nondevice_vad = 0, false_forwards = 0;
  std::size_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;

  for (const auto& d : decisions) {
    const auto it = by_id.find(d.utterance_id);
    if (it == by_id.end()) {
      throw std::invalid_argument("score: decision for unknown utterance id " + d.utterance_id);
    }
    const UtteranceEvent& e = *it->second;
    const int row = static_cast<int>(e.y_true);
    const int col = static_cast<int>(d.predicted_label);
    ++confusion_counts[row][col];

    if (!e.vad_positive()) continue;
    const bool forwarded = d.action == RoutingAction::kForward;
    const bool is_device = e.y_true == AddresseeLabel::kDeviceDirected;

    auto& sc = sessions[e.session_id];
    auto& cc = conditions[{e.speakers_present, e.noise_band}];
    auto& pc = speaker_counts[e.speakers_present];
    ++sc.total;
    ++cc.total;
    ++pc.total;
    if (is_device) {
      ++sc.device;
      ++cc.device;
      ++pc.device;
    } else {
      ++nondevice_vad;
      if (forwarded) ++false_forwards;
    }
    if (forwarded && is_device) {
      ++sc.tp;
      ++cc.tp;
      ++pc.tp;
      ++pooled_tp;
    } else if (forwarded && !is_device) {
      ++sc.fp;
      ++cc.fp;
      ++pc.fp;
      ++pooled_fp;
    } else if (!forwarded && is_device) {
      ++sc.fn;
      ++cc.fn;
      ++pc.fn;
      ++pooled_fn;
    }
  }

  MetricsReport report;
  report.sessions_total = sessions.size();

  double p_sum = 0.0, r_sum = 0.0;
  for (const auto& [sid, sc] : sessions) {
    if (sc.device == 0) continue;  // no positives: excluded from macro averages
    const double p = (sc.tp + sc.fp) > 0 ? static_cast<double>(sc.tp) / (sc.tp + sc.fp) : 0.0;
    const double r = static_cast<double>(sc.tp) / (sc.tp + sc.fn);
    p_sum += p;
    r_sum += r;
    report.session_f1.push_back(f1_of(p, r));
  }
  const std::size_t scored = report.session_f1.size();
  if (scored > 0) {
    report.precision = p_sum / static_cast<double>(scored);
    report.recall = r_sum / static_cast<double>(scored);
    double f_sum = 0.0;
    for (double f : report.session_f1) f_sum += f;
    report.f1 = f_sum / static_cast<double>(scored);
    report.ci = bootstrap_ci(report.session_f1, bootstrap_resamples, bootstrap_seed);
  }

  report.micro_precision =
      (pooled_tp + pooled_fp) > 0 ? static_cast<double>(pooled_tp) / (pooled_tp + pooled_fp) : 0.0;
  report.micro_recall =
      (pooled_tp + pooled_fn) > 0 ? static_cast<double>(pooled_tp) / (pooled_tp + pooled_fn) : 0.0;
  report.false_trigger_rate =
      nondevice_vad > 0 ? static_cast<double>(false_forwards) / nondevice_vad : 0.0;

  for (int row = 0; row < 3; ++row) {
    std::size_t total = 0;
    for (int col = 0; col < 3; ++col) total += confusion_counts[row][col];
    for (int col = 0; col < 3; ++col) {
      report.confusion[row][col] =
          total > 0 ? 100.0 * static_cast<double>(confusion_counts[row][col]) / total : 0.0;
    }
  }

  auto pooled_prf = [](const SessionCounts& counts) {
    PrfValues v;
    v.precision =
        (counts.tp + counts.fp) > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fp) : 0.0;
    v.recall =
        (counts.tp + counts.fn) > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fn) : 0.0;
    v.f1 = f1_of(v.precision, v.recall);
    v.segments = counts.total;
    return v;
  };
  for (const auto& [key, cc] : conditions) report.per_condition[key] = pooled_prf(cc);
  for (const auto& [speakers, pc] : speaker_counts) report.per_speaker[speakers] = pooled_prf(pc);
  return report;
}

// ---------------------------------------------------------------------------
// PR sweep
// ---------------------------------------------------------------------------

struct PrCurvePoint {
  double tau = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double false_trigger_rate = 0.0;
};

struct PrSweepResult {
  std::vector<PrCurvePoint> points;
  double average_precision = 0.0;  // trapezoid over recall
};

inline PrSweepResult pr_sweep(const std::vector<ScoredSegment>& segments,
                              const std::vector<double>& grid = default_tau_grid()) {
  if (grid.empty()) throw std::invalid_argument("pr_sweep: empty grid");
  PrSweepResult result;
  std::size_t nondevice = 0;
  for (const auto& s : segments) {
    if (s.vad_active && !s.is_device) ++nondevice;
  }
  for (double tau : grid) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& s : segments) {
      if (!s.vad_active) continue;
      const bool fwd = s.c_prime >= tau;
      if (fwd && s.is_device) ++tp;
      if (fwd && !s.is_device) ++fp;
      if (!fwd && s.is_device) ++fn;
    }
    PrCurvePoint pt;
    pt.tau = tau;
    pt.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    pt.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    pt.f1 = f1_of(pt.precision, pt.recall);
    pt.false_trigger_rate = nondevice > 0 ? static_cast<double>(fp) / nondevice : 0.0;
    result.points.push_back(pt);
  }

  // Trapezoid over recall, points ordered by ascending recall.
  std::vector<std::pair<double, double>> rp;
  rp.reserve(result.points.size());
  for (const auto& pt : result.points) rp.emplace_back(pt.recall, pt.precision);
  std::sort(rp.begin(), rp.end());
  double ap = 0.0;
  for (std::size_t i = 1; i < rp.size(); ++i) {
    ap += (rp[i].first - rp[i - 1].first) * 0.5 * (rp[i].second + rp[i - 1].second);
  }
  result.average_precision = ap;
  return result;
}

// ---------------------------------------------------------------------------
// Agreement and calibration
// ---------------------------------------------------------------------------

inline double cohens_kappa(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw std::invalid_argument("cohens_kappa: sequences differ in length");
  }
  if (labels_a.empty()) throw std::invalid_argument("cohens_kappa: empty sequences");
  const double n = static_cast<double>(labels_a.size());
  std::map<int, double> marg_a, marg_b;
  double agree = 0.0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (labels_a[i] == labels_b[i]) agree += 1.0;
    marg_a[labels_a[i]] += 1.0;
    marg_b[labels_b[i]] += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, count] : marg_a) {
    const auto it = marg_b.find(label);
    if (it != marg_b.end()) p_e += (count / n) * (it->second / n);
  }
  if (1.0 - p_e < 1e-12) return 1.0;  // both raters constant and equal
  return (p_o - p_e) / (1.0 - p_e);
}

struct CalibrationBin {
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
};

// Reliability over equal-width confidence bins; scores are treated as the
// predicted probability of the device-directed class.
inline CalibrationReport calibration(const std::vector<std::pair<double, bool>>& scored,
                                     int num_bins = 10) {
  if (scored.empty()) throw std::invalid_argument("calibration: empty input");
  if (num_bins < 1) throw std::invalid_argument("calibration: need >= 1 bin");
  CalibrationReport report;
  std::vector<double> conf_sum(num_bins, 0.0), acc_sum(num_bins, 0.0);
  std::vector<std::size_t> counts(num_bins, 0);
  for (const auto& [c, is_device] : scored) {
    int b = static_cast<int>(c * num_bins);
    b = std::clamp(b, 0, num_bins - 1);
    conf_sum[b] += c;
    acc_sum[b] += is_device ? 1.0 : 0.0;
    ++counts[b];
  }
  const double total = static_cast<double>(scored.size());
  for (int b = 0; b < num_bins; ++b) {
    CalibrationBin bin;
    bin.count = counts[b];
    if (counts[b] > 0) {
      bin.mean_confidence = conf_sum[b] / counts[b];
      bin.accuracy = acc_sum[b] / counts[b];
      report.ece += (counts[b] / total) * std::abs(bin.accuracy - bin.mean_confidence);
    }
    report.bins.push_back(bin);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ablation runner
// ---------------------------------------------------------------------------

enum class AblationVariant { kFull, kNoStage1, kNoStage2, kNoStage3, kEma, kKofN };

inline const char* to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::kFull: return "full";
    case AblationVariant::kNoStage1: return "no_stage1";
    case AblationVariant::kNoStage2: return "no_stage2";
    case AblationVariant::kNoStage3: return "no_stage3";
    case AblationVariant::kEma: return "ema";
    case AblationVariant::kKofN: return "k_of_n";
  }
  return "?";
}

inline AblationVariant variant_from_string(const std::string& s) {
  if (s == "full") return AblationVariant::kFull;
  if (s == "no_stage1") return AblationVariant::kNoStage1;
  if (s == "no_stage2") return AblationVariant::kNoStage2;
  if (s == "no_stage3") return AblationVariant::kNoStage3;
  if (s == "ema") return AblationVariant::kEma;
  if (s == "k_of_n") return AblationVariant::kKofN;
  throw std::invalid_argument("eval: unknown ablation variant: " + s);
}

inline std::vector<AblationVariant> all_ablation_variants() {
  return {AblationVariant::kFull,     AblationVariant::kNoStage1, AblationVariant::kNoStage2,
          AblationVariant::kNoStage3, AblationVariant::kEma,      AblationVariant::kKofN};
}

inline EventPipelineOptions options_for_variant(AblationVariant v) {
  EventPipelineOptions opt;
  opt.modulator.kind = ModulatorKind::kOracle;  // trained-context stand-in
  switch (v) {
    case AblationVariant::kFull:
      break;
    case AblationVariant::kNoStage1:
      opt.stage1_active = false;
      break;
    case AblationVariant::kNoStage2:
      opt.stage2_active = false;
      break;
    case AblationVariant::kNoStage3:
      opt.modulator.kind = ModulatorKind::kNone;  // score straight against tau
      break;
    case AblationVariant::kEma:
      opt.modulator.kind = ModulatorKind::kEma;
      break;
    case AblationVariant::kKofN:
      opt.modulator.kind = ModulatorKind::kKofN;
      break;
  }
  return opt;
}

struct AblationResult {
  std::map<AblationVariant, MetricsReport> reports;
};

// Runs every variant over the same generated sessions (shared seeds: the
// event streams are identical across variants, which is asserted on the
// serialized bytes).
inline AblationResult run_ablation(const std::vector<SessionSpec>& specs,
                                   const std::vector<AblationVariant>& variants,
                                   const DeploymentConfig& cfg, const EvidenceModel& model) {
  if (specs.empty()) throw std::invalid_argument("run_ablation: no session specs");
  if (variants.empty()) throw std::invalid_argument("run_ablation: no variants");

  std::vector<std::vector<UtteranceEvent>> sessions(specs.size());
  parallel_for(specs.size(), [&](std::size_t i) { sessions[i] = generate_session(specs[i]); });

  std::vector<UtteranceEvent> truth;
  std::string baseline_bytes;
  for (const auto& sess : sessions) {
    for (const auto& e : sess) {
      truth.push_back(e);
      baseline_bytes += to_json(e).dump();
      baseline_bytes += '\n';
    }
  }

  std::vector<std::vector<RoutingDecision>> decisions(variants.size());
  parallel_for(variants.size(), [&](std::size_t vi) {
    std::string bytes;
    std::vector<RoutingDecision> all;
    for (const auto& sess : sessions) {
      EventPipeline pipeline(cfg, model, options_for_variant(variants[vi]));
      for (const auto& e : sess) {
        bytes += to_json(e).dump();
        bytes += '\n';
        all.push_back(pipeline.process(e));
      }
    }
    if (bytes != baseline_bytes) {
      throw std::runtime_error("run_ablation: variant saw a different event stream");
    }
    decisions[vi] = std::move(all);
  });

  AblationResult result;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    result.reports[variants[vi]] = score_decisions(decisions[vi], truth);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

struct CostInputs {
  double segments_per_hour = 100.0;
  double device_fraction = 0.08;
  double recall = 0.93;
  double false_trigger_rate = 0.021;
  double asr_seconds_per_segment = 0.2;
  double llm_cost_per_call = 0.01;
  double gate_overhead_s_per_hour = 3.8;

  void validate() const {
    auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0)) throw std::invalid_argument(std::string("cost: ") + name + " must be >= 0");
    };
    nonneg(segments_per_hour, "segments_per_hour");
    nonneg(asr_seconds_per_segment, "asr_seconds_per_segment");
    nonneg(llm_cost_per_call, "llm_cost_per_call");
    nonneg(gate_overhead_s_per_hour, "gate_overhead_s_per_hour");
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument(std::string("cost: ") + name + " must be in [0, 1]");
      }
    };
    unit(device_fraction, "device_fraction");
    unit(recall, "recall");
    unit(false_trigger_rate, "false_trigger_rate");
  }
};

struct CostReport {
  CostInputs inputs;
  double forwards_per_hour = 0.0;
  double asr_reduction_pct = 0.0;
  double asr_cpu_saved_s_per_hour = 0.0;
  double llm_cost_per_hour = 0.0;
  double false_triggers_per_hour = 0.0;
  double missed_per_hour = 0.0;
  double savings_to_overhead_ratio = 0.0;
  double breakeven_device_fraction = 0.0;  // may exceed 1 when no breakeven exists
};

inline CostReport cost_model(const CostInputs& in) {
  in.validate();
  CostReport r;
  r.inputs = in;
  const double rate = in.segments_per_hour;
  const double f = in.device_fraction;
  r.forwards_per_hour = rate * f * in.recall + rate * (1.0 - f) * in.false_trigger_rate;
  r.asr_reduction_pct = rate > 0.0 ? 100.0 * (1.0 - r.forwards_per_hour / rate) : 0.0;
  r.asr_cpu_saved_s_per_hour = in.asr_seconds_per_segment * (rate - r.forwards_per_hour);
  r.llm_cost_per_hour = r.forwards_per_hour * in.llm_cost_per_call;
  r.false_triggers_per_hour = rate * (1.0 - f) * in.false_trigger_rate;
  r.missed_per_hour = rate * f * (1.0 - in.recall);
  r.savings_to_overhead_ratio = in.gate_overhead_s_per_hour > 0.0
                                    ? r.asr_cpu_saved_s_per_hour / in.gate_overhead_s_per_hour
                                    : std::numeric_limits<double>::infinity();
  // Breakeven device fraction: saved ASR seconds equal the gate overhead.
  const double denom = in.recall - in.false_trigger_rate;
  if (denom > 1e-12 && rate > 0.0 && in.asr_seconds_per_segment > 0.0) {
    r.breakeven_device_fraction =
        (1.0 - in.false_trigger_rate -
         in.gate_overhead_s_per_hour / (in.asr_seconds_per_segment * rate)) /
        denom;
  } else {
    r.breakeven_device_fraction = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

// ---------------------------------------------------------------------------
// JSON serialization for reports
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json per_condition = nlohmann::json::array();
  for (const auto& [key, v] : r.per_condition) {
    per_condition.push_back({{"speakers", key.first},
                             {"noise_band", to_string(key.second)},
                             {"precision", v.precision},
                             {"recall", v.recall},
                             {"f1", v.f1}});
  }
  nlohmann::json per_speaker = nlohmann::json::array();
  for (const auto& [speakers, v] : r.per_speaker) {
    per_speaker.push_back({{"speakers", speakers},
                           {"precision", v.precision},
                           {"recall", v.recall},
                           {"f1", v.f1}});
  }
  return nlohmann::json{
      {"kind", "metrics"},
      {"precision", r.precision},
      {"recall", r.recall},
      {"f1", r.f1},
      {"micro_precision", r.micro_precision},
      {"micro_recall", r.micro_recall},
      {"false_trigger_rate", r.false_trigger_rate},
      {"confusion_row_pct",
       {{r.confusion[0][0], r.confusion[0][1], r.confusion[0][2]},
        {r.confusion[1][0], r.confusion[1][1], r.confusion[1][2]},
        {r.confusion[2][0], r.confusion[2][1], r.confusion[2][2]}}},
      {"per_condition", per_condition},
      {"per_speaker", per_speaker},
      {"ci_low", r.ci.first},
      {"ci_high", r.ci.second},
      {"sessions_scored", r.session_f1.size()},
      {"sessions_total", r.sessions_total},
  };
}

inline nlohmann::json to_json(const PrSweepResult& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points) {
    points.push_back({{"tau", p.tau},
                      {"precision", p.precision},
                      {"recall", p.recall},
                      {"f1", p.f1},
                      {"false_trigger_rate", p.false_trigger_rate}});
  }
  return nlohmann::json{
      {"kind", "pr_sweep"}, {"points", points}, {"average_precision", r.average_precision}};
}

inline nlohmann::json to_json(const AblationResult& r) {
  nlohmann::json variants = nlohmann::json::object();
  for (const auto& [variant, report] : r.reports) {
    variants[to_string(variant)] = to_json(report);
  }
  return nlohmann::json{{"kind", "ablation"}, {"variants", variants}};
}

inline nlohmann::json to_json(const CostReport& r) {
  return nlohmann::json{
      {"kind", "cost"},
      {"inputs",
       {{"segments_per_hour", r.inputs.segments_per_hour},
        {"device_fraction", r.inputs.device_fraction},
        {"recall", r.inputs.recall},
        {"false_trigger_rate", r.inputs.false_trigger_rate},
        {"asr_seconds_per_segment", r.inputs.asr_seconds_per_segment},
        {"llm_cost_per_call", r.inputs.llm_cost_per_call},
        {"gate_overhead_s_per_hour", r.inputs.gate_overhead_s_per_hour}}},
      {"forwards_per_hour", r.forwards_per_hour},
      {"asr_reduction_pct", r.asr_reduction_pct},
      {"asr_cpu_saved_s_per_hour", r.asr_cpu_saved_s_per_hour},
      {"llm_cost_per_hour", r.llm_cost_per_hour},
      {"false_triggers_per_hour", r.false_triggers_per_hour},
      {"missed_per_hour", r.missed_per_hour},
      {"savings_to_overhead_ratio", r.savings_to_overhead_ratio},
      {"breakeven_device_fraction", r.breakeven_device_fraction},
  };
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.micro_precision = j.value("micro_precision", 0.0);
  r.micro_recall = j.value("micro_recall", 0.0);
  r.false_trigger_rate = j.at("false_trigger_rate").get<double>();
  const auto& conf = j.at("confusion_row_pct");
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) r.confusion[row][col] = conf[row][col].get<double>();
  }
  for (const auto& c : j.at("per_condition")) {
    PrfValues v;
    v.precision = c.at("precision").get<double>();
    v.recall = c.at("recall").get<double>();
    v.f1 = c.at("f1").get<double>();
    r.per_condition[{c.at("speakers").get<int>(),
                     noise_band_from_string(c.at("noise_band").get<std::string>())}] = v;
  }
  for (const auto& c : j.value("per_speaker", nlohmann::json::array())) {
    PrfValues v;
    v.precision = c.at("precision").get<double>();
    v.recall = c.at("recall").get<double>();
    v.f1 = c.at("f1").get<double>();
    r.per_speaker[c.at("speakers").get<int>()] = v;
  }
  r.ci = {j.value("ci_low", 0.0), j.value("ci_high", 0.0)};
  r.sessions_total = j.value("sessions_total", 0ULL);
  return r;
}

inline PrSweepResult pr_sweep_from_json(const nlohmann::json& j) {
  PrSweepResult r;
  for (const auto& p : j.at("points")) {
    r.points.push_back({p.at("tau").get<double>(), p.at("precision").get<double>(),
                        p.at("recall").get<double>(), p.at("f1").get<double>(),
                        p.at("false_trigger_rate").get<double>()});
  }
  r.average_precision = j.value("average_precision", 0.0);
  return r;
}

inline AblationResult ablation_from_json(const nlohmann::json& j) {
  AblationResult r;
  for (const auto& [name, report] : j.at("variants").items()) {
    r.reports[variant_from_string(name)] = metrics_from_json(report);
  }
  return r;
}

inline nlohmann::json to_json(const PipelineStats& s) {
  return nlohmann::json{
      {"kind", "bench"},
      {"decisions", s.decisions},
      {"latency_median_us", s.latency_median_us},
      {"latency_p95_us", s.latency_p95_us},
      {"forwards", s.forwards},
      {"suppresses", s.suppresses},
      {"abstains", s.abstains},
  };
}

}  // namespace sdar
