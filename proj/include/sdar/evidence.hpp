#pragma once

// Synthetic utterance-level evidence. Routing-quality experiments do not
// have trained scorer weights, so each (label, speakers-present, noise-band,
// kind) condition cell carries a Beta distribution over the scorer's
// confidence output, and events draw from their cell deterministically by
// event id. Ambiguous cells are identical for person and device labels:
// ambiguous utterances carry no usable evidence about their addressee, only
// context around them differs.
//
// Television audio gets two cells: "tv_bf" is the distribution after the
// spatial front-end has attenuated the off-axis source, "tv_raw" is what the
// scorer sees when that stage is bypassed.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdar/rng.hpp"
#include "sdar/sim.hpp"
#include "sdar/stage2.hpp"

namespace sdar {

enum class EvidenceKind : int { kClear = 0, kAmbiguous = 1, kTvBeamformed = 2, kTvRaw = 3 };

inline const char* to_string(EvidenceKind k) {
  switch (k) {
    case EvidenceKind::kClear: return "clear";
    case EvidenceKind::kAmbiguous: return "ambiguous";
    case EvidenceKind::kTvBeamformed: return "tv_bf";
    case EvidenceKind::kTvRaw: return "tv_raw";
  }
  return "?";
}

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
  double mean() const { return alpha / (alpha + beta); }
};

struct EvidenceCellKey {
  int label = 1;          // 1 person, 2 device
  int speakers = 1;       // 1..4 (out-of-range inputs clamp to 4)
  NoiseBand noise = NoiseBand::kLow;
  EvidenceKind kind = EvidenceKind::kClear;

  auto operator<=>(const EvidenceCellKey&) const = default;

  std::string to_string() const {
    return "y" + std::to_string(label) + ".s" + std::to_string(speakers) + "." +
           sdar::to_string(noise) + "." + sdar::to_string(kind);
  }
};

class EvidenceModel {
 public:
  std::uint64_t seed = 0;
  std::map<EvidenceCellKey, BetaParams> cells;

  // Default calibration. Separability decreases with speakers present and
  // noise band so that full-pipeline quality degrades monotonically across
  // the condition grid.
  static EvidenceModel standard(std::uint64_t seed = 0) {
    EvidenceModel m;
    m.seed = seed;
    for (int s = 1; s <= 4; ++s) {
      for (int n = 0; n < 3; ++n) {
        const auto noise = static_cast<NoiseBand>(n);
        const double device_mean = 0.86 - 0.02 * (s - 1) - 0.03 * n;
        const double person_mean = 0.14 + 0.02 * (s - 1) + 0.03 * n;
        m.cells[{2, s, noise, EvidenceKind::kClear}] = from_mean(device_mean, 10.0);
        m.cells[{1, s, noise, EvidenceKind::kClear}] = from_mean(person_mean, 3.2);
        // Identical for both labels by construction.
        const BetaParams amb = from_mean(0.655, 12.0);
        m.cells[{1, s, noise, EvidenceKind::kAmbiguous}] = amb;
        m.cells[{2, s, noise, EvidenceKind::kAmbiguous}] = amb;
        m.cells[{1, s, noise, EvidenceKind::kTvBeamformed}] = from_mean(0.35, 6.0);
        m.cells[{1, s, noise, EvidenceKind::kTvRaw}] = from_mean(0.62, 8.0);
      }
    }
    return m;
  }

  static BetaParams from_mean(double mean, double concentration) {
    return {mean * concentration, (1.0 - mean) * concentration};
  }

  const BetaParams& cell(const EvidenceCellKey& key) const {
    auto it = cells.find(key);
    if (it == cells.end()) {
      throw std::runtime_error("evidence: no distribution for condition cell " + key.to_string());
    }
    return it->second;
  }

  void validate() const {
    for (const auto& [key, params] : cells) {
      if (!(params.alpha > 0.0 && params.beta > 0.0)) {
        throw std::runtime_error("evidence: non-positive Beta parameters in " + key.to_string());
      }
      if (key.kind == EvidenceKind::kAmbiguous) {
        EvidenceCellKey other = key;
        other.label = key.label == 1 ? 2 : 1;
        auto it = cells.find(other);
        if (it == cells.end() || it->second.alpha != params.alpha ||
            it->second.beta != params.beta) {
          throw std::runtime_error(
              "evidence: ambiguous cells must be identical for labels 1 and 2 (" +
              key.to_string() + ")");
        }
      }
    }
  }
};

inline EvidenceCellKey evidence_cell_for(const UtteranceEvent& event, bool stage1_active) {
  if (event.y_true == AddresseeLabel::kSilent) {
    throw std::invalid_argument("evidence: silent segments carry no scorer evidence");
  }
  EvidenceCellKey key;
  key.label = static_cast<int>(event.y_true);
  key.speakers = std::clamp(event.speakers_present, 1, 4);
  key.noise = event.noise_band;
  if (event.tv_origin) {
    key.kind = stage1_active ? EvidenceKind::kTvBeamformed : EvidenceKind::kTvRaw;
  } else if (event.ambiguous) {
    key.kind = EvidenceKind::kAmbiguous;
  } else {
    key.kind = EvidenceKind::kClear;
  }
  return key;
}

// Confidence draw for one event: deterministic in (model seed, event id).
inline double evidence_sample_value(const UtteranceEvent& event, const EvidenceModel& model,
                                    bool stage1_active = true) {
  const BetaParams& params = model.cell(evidence_cell_for(event, stage1_active));
  std::uint64_t mix = model.seed ^ fnv1a64(event.id);
  Rng rng(splitmix64(mix));
  return rng.beta(params.alpha, params.beta);
}

// Stands in for the trained scorer in decision-level experiments.
inline Stage2Score evidence_sample(const UtteranceEvent& event, const EvidenceModel& model,
                                   bool stage1_active = true) {
  return Stage2Score{evidence_sample_value(event, model, stage1_active), event.id, event.t_end};
}

// Video-feature injection stub. The video modality itself is out of scope;
// when a feature vector is present the configured affine adjustment is
// applied and the result clamped to [0, 1].
inline double inject_video_features(double score,
                                    const std::optional<std::vector<double>>& video_vec,
                                    double adjustment = 0.0) {
  if (!video_vec.has_value()) return score;
  return std::clamp(score + adjustment, 0.0, 1.0);
}

inline Stage2Score inject_video_features(const Stage2Score& score,
                                         const std::optional<std::vector<double>>& video_vec,
                                         double adjustment = 0.0) {
  return {inject_video_features(score.confidence, video_vec, adjustment), score.utterance_id,
          score.timestamp};
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const EvidenceModel& model) {
  nlohmann::json cells = nlohmann::json::object();
  for (const auto& [key, params] : model.cells) {
    cells[key.to_string()] = {{"alpha", params.alpha}, {"beta", params.beta}};
  }
  return nlohmann::json{{"kind", "evidence_model"}, {"seed", model.seed}, {"cells", cells}};
}

inline EvidenceCellKey evidence_key_from_string(const std::string& s) {
  // Format: y<label>.s<speakers>.<noise>.<kind>
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t dot = s.find('.', pos);
    parts.push_back(s.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  if (parts.size() != 4 || parts[0].size() < 2 || parts[0][0] != 'y' || parts[1].size() < 2 ||
      parts[1][0] != 's') {
    throw std::runtime_error("evidence: malformed cell key: " + s);
  }
  EvidenceCellKey key;
  key.label = std::stoi(parts[0].substr(1));
  key.speakers = std::stoi(parts[1].substr(1));
  key.noise = noise_band_from_string(parts[2]);
  if (parts[3] == "clear") {
    key.kind = EvidenceKind::kClear;
  } else if (parts[3] == "ambiguous") {
    key.kind = EvidenceKind::kAmbiguous;
  } else if (parts[3] == "tv_bf") {
    key.kind = EvidenceKind::kTvBeamformed;
  } else if (parts[3] == "tv_raw") {
    key.kind = EvidenceKind::kTvRaw;
  } else {
    throw std::runtime_error("evidence: unknown kind in cell key: " + s);
  }
  return key;
}

inline EvidenceModel evidence_model_from_json(const nlohmann::json& j) {
  EvidenceModel model;
  model.seed = j.value("seed", 0ULL);
  for (const auto& [name, params] : j.at("cells").items()) {
    model.cells[evidence_key_from_string(name)] = {params.at("alpha").get<double>(),
                                                   params.at("beta").get<double>()};
  }
  model.validate();
  return model;
}

inline EvidenceModel load_evidence_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("evidence: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return evidence_model_from_json(j);
}

inline void save_evidence_model(const EvidenceModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("evidence: cannot write " + path);
  out << to_json(model).dump(2) << "\n";
}

}  // namespace sdar
