#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sdar/eval.hpp"
#include "sdar/gate.hpp"
#include "sdar/rng.hpp"

namespace {

sdar::UtteranceEvent make_event(const std::string& id, double t_start, double t_end, int label,
                                bool ambiguous = false) {
  sdar::UtteranceEvent e;
  e.id = id;
  e.session_id = "s0";
  e.t_start = t_start;
  e.t_end = t_end;
  e.speaker = label == 2 ? 0 : 1;
  e.y_true = sdar::label_from_int(label);
  e.ambiguous = ambiguous;
  e.speakers_present = 2;
  e.noise_band = sdar::NoiseBand::kLow;
  return e;
}

// Evidence model whose draws are effectively point masses, for arithmetic
// composition tests.
sdar::EvidenceModel pinned_model(double device_score, double person_score,
                                 double ambiguous_score) {
  sdar::EvidenceModel m;
  m.seed = 0;
  const double conc = 5e8;
  for (int s = 1; s <= 4; ++s) {
    for (int n = 0; n < 3; ++n) {
      const auto noise = static_cast<sdar::NoiseBand>(n);
      m.cells[{2, s, noise, sdar::EvidenceKind::kClear}] =
          sdar::EvidenceModel::from_mean(device_score, conc);
      m.cells[{1, s, noise, sdar::EvidenceKind::kClear}] =
          sdar::EvidenceModel::from_mean(person_score, conc);
      const auto amb = sdar::EvidenceModel::from_mean(ambiguous_score, conc);
      m.cells[{1, s, noise, sdar::EvidenceKind::kAmbiguous}] = amb;
      m.cells[{2, s, noise, sdar::EvidenceKind::kAmbiguous}] = amb;
      m.cells[{1, s, noise, sdar::EvidenceKind::kTvBeamformed}] =
          sdar::EvidenceModel::from_mean(0.2, conc);
      m.cells[{1, s, noise, sdar::EvidenceKind::kTvRaw}] =
          sdar::EvidenceModel::from_mean(0.75, conc);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("threshold decision table", "[gate]") {
  sdar::DeploymentConfig cfg;  // tau 0.70, tau_suppress 0.30
  const sdar::VadState active{true, -20.0};

  const auto forward = sdar::decide(0.71, active, cfg);
  REQUIRE(forward.action == sdar::RoutingAction::kForward);
  REQUIRE(forward.predicted_label == sdar::AddresseeLabel::kDeviceDirected);

  const auto abstain = sdar::decide(0.69, active, cfg);
  REQUIRE(abstain.action == sdar::RoutingAction::kAbstain);
  REQUIRE(abstain.predicted_label == sdar::AddresseeLabel::kPersonDirected);

  const auto suppress = sdar::decide(0.10, active, cfg);
  REQUIRE(suppress.action == sdar::RoutingAction::kSuppress);

  const auto silent = sdar::decide(0.99, sdar::VadState{false, -90.0}, cfg);
  REQUIRE(silent.action == sdar::RoutingAction::kSuppress);
  REQUIRE(silent.predicted_label == sdar::AddresseeLabel::kSilent);
}

TEST_CASE("exact threshold boundary forwards", "[gate]") {
  sdar::DeploymentConfig cfg;
  const auto d = sdar::decide(0.70, sdar::VadState{true, -20.0}, cfg);
  REQUIRE(d.action == sdar::RoutingAction::kForward);
  const auto s = sdar::decide(0.30, sdar::VadState{true, -20.0}, cfg);
  REQUIRE(s.action == sdar::RoutingAction::kSuppress);
}

TEST_CASE("silent segments never invoke the scorer", "[gate]") {
  sdar::DeploymentConfig cfg;
  const auto model = pinned_model(0.9, 0.1, 0.6);
  sdar::EventPipeline pipeline(cfg, model);
  const auto d = pipeline.process(make_event("e0", 0.0, 1.0, 0));
  REQUIRE(d.action == sdar::RoutingAction::kSuppress);
  REQUIRE(d.predicted_label == sdar::AddresseeLabel::kSilent);
  REQUIRE(pipeline.stage2_invocations() == 0);

  pipeline.process(make_event("e1", 2.0, 3.0, 2));
  REQUIRE(pipeline.stage2_invocations() == 1);
}

TEST_CASE("zero-weight learned modulator halves a 0.9 evidence draw into abstain", "[gate]") {
  sdar::DeploymentConfig cfg;
  const auto model = pinned_model(0.9, 0.1, 0.6);
  const auto stage3 = sdar::Stage3Network::zeros();
  sdar::EventPipelineOptions opt;
  opt.modulator.kind = sdar::ModulatorKind::kLearned;
  opt.modulator.network = &stage3;
  sdar::EventPipeline pipeline(cfg, model, opt);
  const auto d = pipeline.process(make_event("e0", 0.0, 1.0, 2));
  REQUIRE(d.raw_confidence == Catch::Approx(0.9).margin(1e-3));
  REQUIRE(d.alpha == 0.5);
  REQUIRE(d.modulated_confidence == Catch::Approx(0.45).margin(1e-3));
  REQUIRE(d.action == sdar::RoutingAction::kAbstain);
}

TEST_CASE("oracle modulator licenses ambiguous follow-ups only after device turns", "[gate]") {
  sdar::DeploymentConfig cfg;
  const auto model = pinned_model(0.9, 0.1, 0.75);
  sdar::EventPipelineOptions opt;
  opt.modulator.kind = sdar::ModulatorKind::kOracle;
  sdar::EventPipeline pipeline(cfg, model, opt);

  // Ambiguous with no device context: suppressed.
  const auto cold = pipeline.process(make_event("e0", 0.0, 1.0, 1, true));
  REQUIRE(cold.alpha == 0.0);
  REQUIRE(cold.action == sdar::RoutingAction::kSuppress);

  // Clear device turn forwards, then an ambiguous follow-up within 8 s passes.
  const auto cmd = pipeline.process(make_event("e1", 5.0, 6.0, 2));
  REQUIRE(cmd.action == sdar::RoutingAction::kForward);
  const auto followup = pipeline.process(make_event("e2", 8.0, 9.0, 2, true));
  REQUIRE(followup.alpha == 1.0);
  REQUIRE(followup.action == sdar::RoutingAction::kForward);

  // Past the horizon the context has expired.
  const auto stale = pipeline.process(make_event("e3", 20.0, 21.0, 2, true));
  REQUIRE(stale.alpha == 0.0);
}

TEST_CASE("event stream time regression is rejected", "[gate]") {
  sdar::DeploymentConfig cfg;
  const auto model = pinned_model(0.9, 0.1, 0.6);
  sdar::EventPipeline pipeline(cfg, model);
  pipeline.process(make_event("e0", 10.0, 11.0, 1));
  REQUIRE_THROWS_WITH(pipeline.process(make_event("e1", 3.0, 4.0, 1)),
                      Catch::Matchers::ContainsSubstring("regression"));
}

TEST_CASE("single-mic audio path equals the manual bypass composition", "[gate]") {
  sdar::Rng rng(20);
  sdar::MultichannelFrame audio;
  audio.samples.resize(1);
  audio.samples[0].resize(8000);
  for (auto& v : audio.samples[0]) v = rng.uniform(-0.5, 0.5);

  sdar::DeploymentConfig cfg;
  const auto net = sdar::Stage2Network::random(4);
  sdar::AudioPipeline pipeline(cfg, net);
  const auto d = pipeline.process(audio, "u0");

  // Manual composition on channel 0.
  const auto mono = sdar::bypass(audio);
  const auto feats = sdar::compute_features(mono.samples, 0.0);
  const double c = net.forward(feats);
  const auto manual = sdar::decide(c, sdar::VadState{true, -20.0}, cfg);

  REQUIRE(d.raw_confidence == c);
  REQUIRE(d.action == manual.action);
  REQUIRE(pipeline.stage2_invocations() == 1);
}

TEST_CASE("silent audio suppresses without scoring", "[gate]") {
  sdar::MultichannelFrame audio;
  audio.samples = {std::vector<double>(4000, 0.0)};
  sdar::DeploymentConfig cfg;
  const auto net = sdar::Stage2Network::random(4);
  sdar::AudioPipeline pipeline(cfg, net);
  const auto d = pipeline.process(audio, "u0");
  REQUIRE(d.action == sdar::RoutingAction::kSuppress);
  REQUIRE(d.predicted_label == sdar::AddresseeLabel::kSilent);
  REQUIRE(pipeline.stage2_invocations() == 0);
}

TEST_CASE("threshold selection: crossover grid point", "[gate]") {
  std::vector<sdar::ScoredSegment> session;
  for (double c : {0.56, 0.70, 0.80, 0.90}) session.push_back({c, true, true});
  for (double c : {0.70, 0.60}) session.push_back({c, false, true});
  const double tau =
      sdar::select_threshold({session}, sdar::ThresholdPolicy::kCrossover);
  REQUIRE(tau == Catch::Approx(0.70));
}

TEST_CASE("threshold selection: separable scores tie-break upward", "[gate]") {
  std::vector<sdar::ScoredSegment> session;
  for (double c : {0.90, 0.95, 0.99}) session.push_back({c, true, true});
  for (double c : {0.10, 0.20, 0.30}) session.push_back({c, false, true});
  REQUIRE(sdar::select_threshold({session}, sdar::ThresholdPolicy::kCrossover) ==
          Catch::Approx(0.85));
  REQUIRE(sdar::select_threshold({session}, sdar::ThresholdPolicy::kMaxF1) ==
          Catch::Approx(0.85));
}

TEST_CASE("threshold selection: single positive, max F1", "[gate]") {
  std::vector<sdar::ScoredSegment> session{{0.9, true, true}};
  REQUIRE(sdar::select_threshold({session}, sdar::ThresholdPolicy::kMaxF1) ==
          Catch::Approx(0.85));
}

TEST_CASE("threshold selection requires a positive label", "[gate]") {
  std::vector<sdar::ScoredSegment> session{{0.9, false, true}, {0.2, false, true}};
  REQUIRE_THROWS_WITH(sdar::select_threshold({session}, sdar::ThresholdPolicy::kMaxF1),
                      Catch::Matchers::ContainsSubstring("positive"));
}

TEST_CASE("fail-closed: forwarding implies threshold cleared", "[gate]") {
  sdar::Rng rng(30);
  for (int i = 0; i < 2000; ++i) {
    sdar::DeploymentConfig cfg;
    cfg.tau = rng.uniform(0.05, 0.99);
    cfg.tau_suppress = rng.uniform(0.0, cfg.tau - 0.01);
    const double c = rng.uniform(0.0, 1.0);
    const bool vad = rng.bernoulli(0.8);
    const auto d = sdar::decide(c, sdar::VadState{vad, vad ? -20.0 : -90.0}, cfg);
    if (d.action == sdar::RoutingAction::kForward) {
      REQUIRE(vad);
      REQUIRE(c >= cfg.tau);
      REQUIRE(d.predicted_label == sdar::AddresseeLabel::kDeviceDirected);
    }
  }
}

TEST_CASE("raising tau never un-suppresses", "[gate]") {
  sdar::Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    const double c = rng.uniform(0.0, 1.0);
    sdar::DeploymentConfig lo, hi;
    lo.tau = rng.uniform(0.35, 0.8);
    hi.tau = lo.tau + rng.uniform(0.0, 0.19);
    const sdar::VadState vad{true, -20.0};
    const bool fwd_lo = sdar::decide(c, vad, lo).action == sdar::RoutingAction::kForward;
    const bool fwd_hi = sdar::decide(c, vad, hi).action == sdar::RoutingAction::kForward;
    if (fwd_hi) REQUIRE(fwd_lo);
  }
}

TEST_CASE("decision stream is deterministic for a fixed seed", "[gate]") {
  sdar::SessionSpec spec;
  spec.rng_seed = 50;
  spec.duration_s = 3600.0;
  const auto events = sdar::generate_session(spec);
  const auto model = sdar::EvidenceModel::standard(1);
  sdar::DeploymentConfig cfg;

  auto run = [&] {
    sdar::EventPipelineOptions opt;
    opt.modulator.kind = sdar::ModulatorKind::kOracle;
    sdar::EventPipeline pipeline(cfg, model, opt);
    std::string bytes;
    for (const auto& e : events) {
      bytes += sdar::to_json(pipeline.process(e), false).dump();
      bytes += '\n';
    }
    return bytes;
  };
  REQUIRE(run() == run());
}

TEST_CASE("multichannel audio path beamforms when the geometry says so", "[gate]") {
  sdar::AudioScene scene;
  scene.geometry = {{-0.05, 0, 0}, {0.05, 0, 0}};
  scene.rng_seed = 21;
  sdar::SceneSource src;
  src.position = sdar::source_at_azimuth(15.0);
  sdar::SignalComponent noise;
  noise.kind = sdar::SignalComponent::Kind::kBandNoise;
  noise.amplitude = 0.2;
  src.components.push_back(noise);
  scene.sources.push_back(src);
  const auto blocks = sdar::render_audio(scene, 0.5);

  sdar::DeploymentConfig cfg;
  cfg.mic_geometry = scene.geometry;
  const auto net = sdar::Stage2Network::random(4);
  sdar::AudioPipeline pipeline(cfg, net);
  const auto d = pipeline.process(blocks.front(), "utt-bf");
  REQUIRE(d.raw_confidence > 0.0);
  REQUIRE(pipeline.stage2_invocations() == 1);

  // Geometry/channel mismatch is an error rather than a silent fallback.
  sdar::DeploymentConfig bad = cfg;
  bad.mic_geometry.push_back({0.1, 0, 0});
  sdar::AudioPipeline mismatched(bad, net);
  REQUIRE_THROWS_WITH(mismatched.process(blocks.front(), "utt-bad"),
                      Catch::Matchers::ContainsSubstring("channel count"));
}

TEST_CASE("a 3600-event stream routes in well under ten seconds", "[gate]") {
  sdar::SessionSpec spec;
  spec.rng_seed = 52;
  spec.duration_s = 4 * 3600.0;
  spec.segments_per_hour = 900.0;
  const auto events = sdar::generate_session(spec);
  REQUIRE(events.size() >= 3600);
  const auto model = sdar::EvidenceModel::standard(1);
  sdar::DeploymentConfig cfg;
  sdar::EventPipelineOptions opt;
  opt.modulator.kind = sdar::ModulatorKind::kOracle;

  const auto t0 = std::chrono::steady_clock::now();
  const auto stats = sdar::bench(events, cfg, model, opt);
  const double elapsed = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - t0).count();
  REQUIRE(stats.decisions == events.size());
  REQUIRE(elapsed < 10.0);
}

TEST_CASE("bench aggregates latency and action counts", "[gate]") {
  sdar::SessionSpec spec;
  spec.rng_seed = 51;
  spec.duration_s = 1800.0;
  const auto events = sdar::generate_session(spec);
  const auto model = sdar::EvidenceModel::standard(1);
  sdar::DeploymentConfig cfg;
  sdar::EventPipelineOptions opt;
  opt.modulator.kind = sdar::ModulatorKind::kOracle;
  const auto stats = sdar::bench(events, cfg, model, opt);
  REQUIRE(stats.decisions == events.size());
  REQUIRE(stats.forwards + stats.suppresses + stats.abstains == stats.decisions);
  REQUIRE(stats.latency_median_us <= stats.latency_p95_us);

  const auto single = sdar::bench({events.front()}, cfg, model, opt);
  REQUIRE(single.latency_median_us == single.latency_p95_us);
  REQUIRE_THROWS_AS(sdar::bench({}, cfg, model, opt), std::invalid_argument);
}
