#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sdar/audio_io.hpp"
#include "sdar/features.hpp"
#include "sdar/frontend.hpp"
#include "sdar/sim.hpp"

namespace {

std::string events_as_bytes(const std::vector<sdar::UtteranceEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += sdar::to_json(e).dump();
    out += '\n';
  }
  return out;
}

struct Mix {
  std::size_t silent = 0, person = 0, device = 0;
  std::size_t vad_positive() const { return person + device; }
  std::size_t total() const { return silent + person + device; }
};

Mix count_mix(const std::vector<sdar::UtteranceEvent>& events) {
  Mix mix;
  for (const auto& e : events) {
    switch (e.y_true) {
      case sdar::AddresseeLabel::kSilent: ++mix.silent; break;
      case sdar::AddresseeLabel::kPersonDirected: ++mix.person; break;
      case sdar::AddresseeLabel::kDeviceDirected: ++mix.device; break;
    }
  }
  return mix;
}

std::vector<sdar::UtteranceEvent> big_stream(double device_fraction, std::size_t min_vad) {
  std::vector<sdar::UtteranceEvent> all;
  std::uint64_t seed = 100;
  while (count_mix(all).vad_positive() < min_vad) {
    sdar::SessionSpec spec;
    spec.rng_seed = seed++;
    spec.duration_s = 4 * 3600.0;
    spec.segments_per_hour = 400.0;
    spec.device_fraction = device_fraction;
    auto events = sdar::generate_session(spec);
    all.insert(all.end(), events.begin(), events.end());
  }
  return all;
}

}  // namespace

TEST_CASE("identical spec and seed give byte-identical streams", "[sim]") {
  sdar::SessionSpec spec;
  spec.rng_seed = 42;
  spec.duration_s = 1800.0;
  spec.tv_distractor = true;
  const auto a = sdar::generate_session(spec);
  const auto b = sdar::generate_session(spec);
  REQUIRE(events_as_bytes(a) == events_as_bytes(b));
  REQUIRE_FALSE(a.empty());

  spec.rng_seed = 43;
  const auto c = sdar::generate_session(spec);
  REQUIRE(events_as_bytes(a) != events_as_bytes(c));
}

TEST_CASE("device fraction among VAD-positive segments tracks the spec", "[sim]") {
  const auto ambient = big_stream(0.08, 100000);
  const auto mix = count_mix(ambient);
  const double fraction = static_cast<double>(mix.device) / mix.vad_positive();
  REQUIRE(fraction == Catch::Approx(0.08).margin(0.005));
}

TEST_CASE("evaluation-set device fraction of 0.12 is matched", "[sim]") {
  const auto stream = big_stream(0.12, 60000);
  const auto mix = count_mix(stream);
  const double fraction = static_cast<double>(mix.device) / mix.vad_positive();
  REQUIRE(fraction == Catch::Approx(0.12).margin(0.005));
}

TEST_CASE("overall stream composition approaches 34/58/8 at the eval fraction", "[sim]") {
  const auto stream = big_stream(0.12, 60000);
  const auto mix = count_mix(stream);
  const double total = static_cast<double>(mix.total());
  REQUIRE(100.0 * mix.silent / total == Catch::Approx(34.0).margin(2.0));
  REQUIRE(100.0 * mix.person / total == Catch::Approx(58.0).margin(2.0));
  REQUIRE(100.0 * mix.device / total == Catch::Approx(8.0).margin(1.0));
}

TEST_CASE("per-speaker events never overlap and advance in time", "[sim]") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    sdar::SessionSpec spec;
    spec.rng_seed = seed;
    spec.duration_s = 7200.0;
    spec.speakers_present = 4;
    spec.tv_distractor = true;
    const auto events = sdar::generate_session(spec);
    std::map<int, double> last_end;
    for (const auto& e : events) {
      e.validate();
      const auto it = last_end.find(e.speaker);
      if (it != last_end.end()) REQUIRE(e.t_start >= it->second - 1e-9);
      last_end[e.speaker] = e.t_end;
    }
  }
}

TEST_CASE("ambiguous events are follow-ups within the context horizon", "[sim]") {
  sdar::SessionSpec spec;
  spec.rng_seed = 9;
  spec.duration_s = 4 * 3600.0;
  spec.ambiguous_followup_rate = 0.4;
  const auto events = sdar::generate_session(spec);
  std::size_t ambiguous = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!events[i].ambiguous) continue;
    ++ambiguous;
    bool found = false;
    for (std::size_t j = 0; j < i; ++j) {
      if (events[j].y_true == events[i].y_true && !events[j].tv_origin &&
          events[i].t_start - events[j].t_end <= 8.0 && events[j].t_end <= events[i].t_start) {
        found = true;
      }
    }
    REQUIRE(found);
  }
  REQUIRE(ambiguous > 0);
}

TEST_CASE("ambiguous follow-up rate is honoured for device turns", "[sim]") {
  const auto stream = big_stream(0.12, 50000);
  std::size_t device = 0, device_ambiguous = 0;
  for (const auto& e : stream) {
    if (e.y_true != sdar::AddresseeLabel::kDeviceDirected) continue;
    ++device;
    if (e.ambiguous) ++device_ambiguous;
  }
  REQUIRE(static_cast<double>(device_ambiguous) / device == Catch::Approx(0.3).margin(0.03));
}

TEST_CASE("five speakers are allowed but flagged out of the evaluated range", "[sim]") {
  sdar::SessionSpec spec;
  spec.rng_seed = 5;
  spec.duration_s = 1200.0;
  spec.speakers_present = 5;
  REQUIRE(spec.out_of_evaluated_range());
  const auto events = sdar::generate_session(spec);
  REQUIRE_FALSE(events.empty());
  for (const auto& e : events) REQUIRE(e.speakers_present == 5);

  spec.speakers_present = 0;
  REQUIRE_THROWS_AS(sdar::generate_session(spec), std::invalid_argument);
}

TEST_CASE("failure scenarios inject their structures", "[sim]") {
  sdar::SessionSpec spec;
  spec.rng_seed = 77;
  spec.duration_s = 3600.0;
  const auto base = sdar::generate_session(spec);

  const auto tv = sdar::inject_failure_scenario(base, sdar::FailureScenario::kTvInterrogative, 1);
  std::size_t tv_events = 0;
  for (const auto& e : tv) {
    if (e.scenario == "tv_interrogative") {
      REQUIRE(e.tv_origin);
      REQUIRE(e.y_true == sdar::AddresseeLabel::kPersonDirected);
      ++tv_events;
    }
  }
  REQUIRE(tv_events > 5);

  const auto carry = sdar::inject_failure_scenario(base, sdar::FailureScenario::kCarryOver, 1);
  std::size_t carry_events = 0;
  for (const auto& e : carry) {
    if (e.scenario != "carry_over") continue;
    ++carry_events;
    REQUIRE(e.ambiguous);
    REQUIRE(e.y_true == sdar::AddresseeLabel::kPersonDirected);
    bool near_device = false;
    for (const auto& d : base) {
      if (d.y_true == sdar::AddresseeLabel::kDeviceDirected && e.t_start >= d.t_end &&
          e.t_start - d.t_end <= 2.0) {
        near_device = true;
      }
    }
    REQUIRE(near_device);
  }
  REQUIRE(carry_events > 0);

  const auto overlap =
      sdar::inject_failure_scenario(base, sdar::FailureScenario::kOverlapCommand, 1);
  std::size_t overlap_events = 0;
  for (const auto& e : overlap) {
    if (e.scenario != "overlap_command") continue;
    ++overlap_events;
    REQUIRE(e.y_true == sdar::AddresseeLabel::kDeviceDirected);
    bool overlaps_person = false;
    for (const auto& p : base) {
      if (p.y_true == sdar::AddresseeLabel::kPersonDirected && e.t_start < p.t_end &&
          p.t_start < e.t_end) {
        overlaps_person = true;
      }
    }
    REQUIRE(overlaps_person);
  }
  REQUIRE(overlap_events > 0);

  REQUIRE_THROWS_AS(sdar::scenario_from_string("unknown"), std::invalid_argument);
}

TEST_CASE("event JSONL round trips through files", "[sim]") {
  sdar::SessionSpec spec;
  spec.rng_seed = 15;
  spec.duration_s = 1200.0;
  const auto events = sdar::generate_session(spec);
  const auto path = std::filesystem::temp_directory_path() / "sdar_events.jsonl";
  sdar::write_events_jsonl(events, path.string());
  const auto loaded = sdar::read_events_jsonl(path.string());
  REQUIRE(events_as_bytes(loaded) == events_as_bytes(events));
}

TEST_CASE("broadside source renders identical channels", "[sim]") {
  sdar::AudioScene scene;
  scene.geometry = {{-0.05, 0, 0}, {0.05, 0, 0}};
  sdar::SceneSource src;
  src.position = sdar::source_at_azimuth(0.0);
  src.components.push_back({sdar::SignalComponent::Kind::kTone, 500.0, 0, 0, 0.2, 0.0, 1e9});
  scene.sources.push_back(src);
  const auto blocks = sdar::render_audio(scene, 0.2);
  for (const auto& b : blocks) {
    for (std::size_t n = 0; n < b.length(); ++n) {
      REQUIRE(b.samples[0][n] == Catch::Approx(b.samples[1][n]).margin(1e-12));
    }
  }
}

TEST_CASE("rendered plane wave carries the geometric channel delay", "[sim]") {
  sdar::AudioScene scene;
  scene.geometry = {{0.05, 0, 0}, {-0.05, 0, 0}};
  scene.rng_seed = 5;
  sdar::SceneSource src;
  src.position = sdar::source_at_azimuth(30.0);
  sdar::SignalComponent noise;
  noise.kind = sdar::SignalComponent::Kind::kBandNoise;
  noise.amplitude = 0.1;
  src.components.push_back(noise);
  scene.sources.push_back(src);
  const auto blocks = sdar::render_audio(scene, 0.25);

  sdar::MicArrayGeometry geo{scene.geometry};
  const auto r = sdar::estimate_tdoa(blocks.front(), 0, 1, geo);
  // 0.10 * sin(30 deg) / 343 = 145.8 us, about 2.33 samples at 16 kHz
  REQUIRE(r.tdoa_s == Catch::Approx(145.8e-6).margin(10e-6));
}

TEST_CASE("audio container round trips at float precision", "[sim]") {
  sdar::AudioScene scene;
  scene.geometry = {{-0.04, 0, 0}, {0.04, 0, 0}};
  scene.rng_seed = 8;
  scene.noise_floor_amplitude = 0.01;
  sdar::SceneSource src;
  src.position = sdar::source_at_azimuth(-20.0);
  src.components.push_back({sdar::SignalComponent::Kind::kTone, 900.0, 0, 0, 0.4, 0.0, 1e9});
  scene.sources.push_back(src);
  const auto blocks = sdar::render_audio(scene, 0.3);

  const auto path = std::filesystem::temp_directory_path() / "sdar_audio_rt.pcm";
  sdar::write_audio(blocks.front(), path.string());
  const auto loaded = sdar::read_audio(path.string());
  REQUIRE(loaded.sample_rate == blocks.front().sample_rate);
  REQUIRE(loaded.channel_count() == 2);
  REQUIRE(loaded.length() == blocks.front().length());
  for (std::size_t ch = 0; ch < 2; ++ch) {
    for (std::size_t n = 0; n < loaded.length(); ++n) {
      REQUIRE(loaded.samples[ch][n] ==
              Catch::Approx(blocks.front().samples[ch][n]).margin(1e-7));
    }
  }
  REQUIRE_THROWS_WITH(sdar::read_audio("/nonexistent.pcm"),
                      Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("noise-only scene stays below the VAD threshold", "[sim]") {
  sdar::AudioScene scene;
  scene.geometry = {{0, 0, 0}};
  scene.noise_floor_amplitude = 1e-5;
  scene.rng_seed = 3;
  sdar::SceneSource src;
  src.position = {0.0, 1.0, 0.0};
  src.components.push_back({sdar::SignalComponent::Kind::kTone, 500.0, 0, 0, 0.0, 0.0, 1e9});
  scene.sources.push_back(src);
  const auto blocks = sdar::render_audio(scene, 0.5);
  for (const auto& frame : sdar::frame_signal(blocks.front().samples[0], 16000)) {
    REQUIRE_FALSE(sdar::vad(frame, -60.0).active);
  }
}
