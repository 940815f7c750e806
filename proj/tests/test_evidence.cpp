#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>

#include "sdar/evidence.hpp"

namespace {

sdar::UtteranceEvent event_with(int label, int speakers, sdar::NoiseBand noise, bool ambiguous,
                                bool tv, const std::string& id) {
  sdar::UtteranceEvent e;
  e.id = id;
  e.session_id = "s0";
  e.t_start = 0.0;
  e.t_end = 1.0;
  e.speaker = 0;
  e.y_true = sdar::label_from_int(label);
  e.ambiguous = ambiguous;
  e.tv_origin = tv;
  e.speakers_present = speakers;
  e.noise_band = noise;
  return e;
}

double mean_score(const sdar::EvidenceModel& model, int label, bool ambiguous, int draws,
                  const std::string& tag) {
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto e = event_with(label, 1, sdar::NoiseBand::kLow, ambiguous, false,
                              tag + std::to_string(i));
    acc += sdar::evidence_sample_value(e, model);
  }
  return acc / draws;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("clear device-directed evidence averages above 0.80", "[evidence]") {
  const auto model = sdar::EvidenceModel::standard(0);
  REQUIRE(mean_score(model, 2, false, 10000, "dev") >= 0.80);
}

TEST_CASE("clear non-device evidence averages below 0.30", "[evidence]") {
  const auto model = sdar::EvidenceModel::standard(0);
  REQUIRE(mean_score(model, 1, false, 10000, "per") <= 0.30);
}

TEST_CASE("ambiguous evidence is label-indistinguishable", "[evidence]") {
  const auto model = sdar::EvidenceModel::standard(0);
  std::vector<double> person, device;
  for (int i = 0; i < 10000; ++i) {
    person.push_back(sdar::evidence_sample_value(
        event_with(1, 2, sdar::NoiseBand::kMed, true, false, "ap" + std::to_string(i)), model));
    device.push_back(sdar::evidence_sample_value(
        event_with(2, 2, sdar::NoiseBand::kMed, true, false, "ad" + std::to_string(i)), model));
  }
  REQUIRE(ks_statistic(person, device) < 0.02);
}

TEST_CASE("evidence is deterministic in event id and model seed", "[evidence]") {
  const auto model = sdar::EvidenceModel::standard(7);
  const auto e = event_with(2, 3, sdar::NoiseBand::kHigh, false, false, "fixed");
  REQUIRE(sdar::evidence_sample_value(e, model) == sdar::evidence_sample_value(e, model));

  const auto other = event_with(2, 3, sdar::NoiseBand::kHigh, false, false, "other");
  REQUIRE(sdar::evidence_sample_value(e, model) != sdar::evidence_sample_value(other, model));

  const auto reseeded = sdar::EvidenceModel::standard(8);
  REQUIRE(sdar::evidence_sample_value(e, model) != sdar::evidence_sample_value(e, reseeded));
}

TEST_CASE("separability degrades with speakers and noise", "[evidence]") {
  const auto model = sdar::EvidenceModel::standard(0);
  const auto easy_dev = model.cell({2, 1, sdar::NoiseBand::kLow, sdar::EvidenceKind::kClear});
  const auto hard_dev = model.cell({2, 4, sdar::NoiseBand::kHigh, sdar::EvidenceKind::kClear});
  const auto easy_per = model.cell({1, 1, sdar::NoiseBand::kLow, sdar::EvidenceKind::kClear});
  const auto hard_per = model.cell({1, 4, sdar::NoiseBand::kHigh, sdar::EvidenceKind::kClear});
  REQUIRE(easy_dev.mean() > hard_dev.mean());
  REQUIRE(easy_per.mean() < hard_per.mean());
}

TEST_CASE("television evidence depends on the spatial front-end", "[evidence]") {
  const auto model = sdar::EvidenceModel::standard(0);
  double with_bf = 0.0, without_bf = 0.0;
  for (int i = 0; i < 4000; ++i) {
    const auto e = event_with(1, 2, sdar::NoiseBand::kMed, false, true, "tv" + std::to_string(i));
    with_bf += sdar::evidence_sample_value(e, model, true);
    without_bf += sdar::evidence_sample_value(e, model, false);
  }
  REQUIRE(with_bf / 4000.0 < 0.45);
  REQUIRE(without_bf / 4000.0 > 0.55);
}

TEST_CASE("missing condition cell is an error", "[evidence]") {
  sdar::EvidenceModel sparse;
  sparse.cells[{2, 1, sdar::NoiseBand::kLow, sdar::EvidenceKind::kClear}] = {8.0, 2.0};
  const auto e = event_with(1, 1, sdar::NoiseBand::kLow, false, false, "x");
  REQUIRE_THROWS_WITH(sdar::evidence_sample_value(e, sparse),
                      Catch::Matchers::ContainsSubstring("condition cell"));
  const auto silent = event_with(0, 1, sdar::NoiseBand::kLow, false, false, "sil");
  REQUIRE_THROWS_AS(sdar::evidence_sample_value(silent, sparse), std::invalid_argument);
}

TEST_CASE("evidence sample carries the utterance identity", "[evidence]") {
  const auto model = sdar::EvidenceModel::standard(0);
  auto e = event_with(2, 1, sdar::NoiseBand::kLow, false, false, "scored");
  e.t_end = 4.5;
  const auto score = sdar::evidence_sample(e, model);
  REQUIRE(score.utterance_id == "scored");
  REQUIRE(score.timestamp == Catch::Approx(4.5));
  REQUIRE(score.confidence == sdar::evidence_sample_value(e, model));
}

TEST_CASE("video injection stub", "[evidence]") {
  REQUIRE(sdar::inject_video_features(0.7, std::nullopt, 0.1) == Catch::Approx(0.7));
  REQUIRE(sdar::inject_video_features(0.7, std::vector<double>{0.2, 0.3}, 0.1) ==
          Catch::Approx(0.8));
  REQUIRE(sdar::inject_video_features(0.95, std::vector<double>{0.1}, 0.2) == Catch::Approx(1.0));
}

TEST_CASE("malformed cell keys are rejected", "[evidence]") {
  REQUIRE_THROWS_WITH(sdar::evidence_key_from_string("nonsense"),
                      Catch::Matchers::ContainsSubstring("malformed"));
  REQUIRE_THROWS_AS(sdar::evidence_key_from_string("y2.s1.low.mystery"), std::runtime_error);
  REQUIRE_THROWS_AS(sdar::evidence_key_from_string("y2.s1.quiet.clear"), std::invalid_argument);
  const auto key = sdar::evidence_key_from_string("y2.s3.high.tv_raw");
  REQUIRE(key.label == 2);
  REQUIRE(key.speakers == 3);
  REQUIRE(key.noise == sdar::NoiseBand::kHigh);
  REQUIRE(key.kind == sdar::EvidenceKind::kTvRaw);
}

TEST_CASE("evidence model JSON round trip and validation", "[evidence]") {
  const auto model = sdar::EvidenceModel::standard(3);
  const auto path = std::filesystem::temp_directory_path() / "sdar_evidence.json";
  sdar::save_evidence_model(model, path.string());
  const auto loaded = sdar::load_evidence_model(path.string());
  REQUIRE(loaded.seed == model.seed);
  REQUIRE(loaded.cells.size() == model.cells.size());
  for (const auto& [key, params] : model.cells) {
    REQUIRE(loaded.cell(key).alpha == Catch::Approx(params.alpha));
    REQUIRE(loaded.cell(key).beta == Catch::Approx(params.beta));
  }

  auto broken = model;
  broken.cells[{1, 2, sdar::NoiseBand::kLow, sdar::EvidenceKind::kAmbiguous}] = {2.0, 2.0};
  REQUIRE_THROWS_WITH(broken.validate(), Catch::Matchers::ContainsSubstring("identical"));
}
