// sdar: command-line front door for the routing engine.
//
//   simulate   generate labeled multi-speaker session event streams
//   route      run the routing pipeline over events (or one audio file)
//   sweep      precision/recall over the operating-threshold grid
//   ablate     stage-ablation comparison on seeded simulator sessions
//   cost       downstream pipeline-savings arithmetic
//   bench      per-decision latency statistics
//   report     render saved JSON reports as CSV or SVG
//   weights    create seeded (optionally int8-quantized) weight bundles
//
// All commands are deterministic for a fixed seed; route zeroes the latency
// field in file output so bytes reproduce (bench reports real timings).

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdar/sdar.hpp"

namespace {

struct SimulateArgs {
  std::string out;
  std::uint64_t seed = 0;
  int sessions = 1;
  double duration_s = 3600.0;
  double device_fraction = 0.08;
  double ambiguous_rate = 0.3;
  int speakers = 2;
  std::string noise = "low";
  bool tv = false;
  double segments_per_hour = 100.0;
  std::string scenario;
};

std::vector<sdar::UtteranceEvent> run_simulation(const SimulateArgs& args) {
  std::vector<sdar::UtteranceEvent> all;
  for (int i = 0; i < args.sessions; ++i) {
    sdar::SessionSpec spec;
    spec.rng_seed = args.seed + static_cast<std::uint64_t>(i);
    spec.duration_s = args.duration_s;
    spec.device_fraction = args.device_fraction;
    spec.ambiguous_followup_rate = args.ambiguous_rate;
    spec.speakers_present = args.speakers;
    spec.noise_band = sdar::noise_band_from_string(args.noise);
    spec.tv_distractor = args.tv;
    spec.segments_per_hour = args.segments_per_hour;
    auto events = sdar::generate_session(spec);
    if (!args.scenario.empty()) {
      events = sdar::inject_failure_scenario(events, sdar::scenario_from_string(args.scenario),
                                             spec.rng_seed);
    }
    all.insert(all.end(), events.begin(), events.end());
  }
  return all;
}

struct RouteArgs {
  std::string events;
  std::string audio;
  std::string config;
  std::string out;
  std::string modulator = "oracle";
  std::string stage3_weights;
  std::string stage2_weights;
  std::string evidence;
  std::string utterance_id = "utt-0";
  std::uint64_t evidence_seed = 0;
  bool no_stage1 = false;
  bool no_stage2 = false;
  bool include_latency = false;
};

sdar::DeploymentConfig load_config_or_default(const std::string& path) {
  return path.empty() ? sdar::DeploymentConfig{} : sdar::load_config(path);
}

sdar::EvidenceModel load_evidence_or_standard(const std::string& path, std::uint64_t seed) {
  return path.empty() ? sdar::EvidenceModel::standard(seed) : sdar::load_evidence_model(path);
}

// Routes a multi-session event file; one pipeline (and context window) per
// session, events processed in file order.
std::vector<sdar::RoutingDecision> route_events(const std::vector<sdar::UtteranceEvent>& events,
                                                const sdar::DeploymentConfig& cfg,
                                                const sdar::EvidenceModel& model,
                                                const sdar::EventPipelineOptions& options) {
  std::map<std::string, sdar::EventPipeline> pipelines;
  std::vector<sdar::RoutingDecision> decisions;
  decisions.reserve(events.size());
  for (const auto& e : events) {
    auto it = pipelines.find(e.session_id);
    if (it == pipelines.end()) {
      it = pipelines.emplace(e.session_id, sdar::EventPipeline(cfg, model, options)).first;
    }
    decisions.push_back(it->second.process(e));
  }
  return decisions;
}

sdar::EventPipelineOptions options_from_route_args(const RouteArgs& args,
                                                   const sdar::Stage3Network* net) {
  sdar::EventPipelineOptions opt;
  opt.stage1_active = !args.no_stage1;
  opt.stage2_active = !args.no_stage2;
  opt.modulator.kind = sdar::modulator_from_string(args.modulator);
  opt.modulator.network = net;
  return opt;
}

int cmd_route(const RouteArgs& args) {
  const sdar::DeploymentConfig cfg = load_config_or_default(args.config);

  if (!args.audio.empty()) {
    if (args.stage2_weights.empty()) {
      throw std::runtime_error("route: --audio needs --weights (scorer bundle)");
    }
    const auto bundle = sdar::load_weights(args.stage2_weights);
    const auto net = sdar::Stage2Network::from_bundle(bundle);
    sdar::ModulatorConfig mod;
    mod.kind = sdar::modulator_from_string(args.modulator == "oracle" ? "none" : args.modulator);
    sdar::Stage3Network stage3;
    if (mod.kind == sdar::ModulatorKind::kLearned) {
      if (args.stage3_weights.empty()) {
        throw std::runtime_error("route: learned modulator needs --stage3-weights");
      }
      stage3 = sdar::Stage3Network::from_bundle(sdar::load_weights(args.stage3_weights));
      mod.network = &stage3;
    }
    sdar::AudioPipeline pipeline(cfg, net, mod);
    const auto frame = sdar::read_audio(args.audio);
    const auto decision = pipeline.process(frame, args.utterance_id);
    const std::string line = sdar::to_json(decision, args.include_latency).dump();
    if (args.out.empty() || args.out == "-") {
      std::cout << line << "\n";
    } else {
      std::ofstream out(args.out);
      if (!out) throw std::runtime_error("route: cannot write " + args.out);
      out << line << "\n";
    }
    return 0;
  }

  if (args.events.empty()) throw std::runtime_error("route: need --events or --audio");
  const auto events = sdar::read_events_jsonl(args.events);
  const auto model = load_evidence_or_standard(args.evidence, args.evidence_seed);

  sdar::Stage3Network stage3;
  const sdar::Stage3Network* net = nullptr;
  if (args.modulator == "learned") {
    if (args.stage3_weights.empty()) {
      throw std::runtime_error("route: learned modulator needs --stage3-weights");
    }
    stage3 = sdar::Stage3Network::from_bundle(sdar::load_weights(args.stage3_weights));
    net = &stage3;
  }
  const auto decisions =
      route_events(events, cfg, model, options_from_route_args(args, net));
  sdar::write_decisions_jsonl(decisions, args.out, args.include_latency);
  return 0;
}

std::vector<sdar::ScoredSegment> scored_segments(
    const std::vector<sdar::UtteranceEvent>& events,
    const std::vector<sdar::RoutingDecision>& decisions) {
  std::map<std::string, const sdar::UtteranceEvent*> by_id;
  for (const auto& e : events) by_id[e.id] = &e;
  std::vector<sdar::ScoredSegment> out;
  for (const auto& d : decisions) {
    const auto* e = by_id.at(d.utterance_id);
    if (!e->vad_positive()) continue;
    out.push_back({d.modulated_confidence, e->y_true == sdar::AddresseeLabel::kDeviceDirected,
                   true});
  }
  return out;
}

void write_or_print(const std::string& content, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << content;
    if (content.empty() || content.back() != '\n') std::cout << "\n";
  } else {
    sdar::write_text_file(content, out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming device-addressed routing engine"};
  app.require_subcommand(1);

  // --- simulate ---
  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "generate labeled session event streams");
  sim->add_option("--out", sim_args.out, "output events JSONL")->required();
  sim->add_option("--seed", sim_args.seed, "base RNG seed");
  sim->add_option("--sessions", sim_args.sessions, "number of sessions")
      ->check(CLI::PositiveNumber);
  sim->add_option("--duration", sim_args.duration_s, "session length in seconds");
  sim->add_option("--device-fraction", sim_args.device_fraction,
                  "device-directed fraction of VAD-positive segments");
  sim->add_option("--ambiguous-rate", sim_args.ambiguous_rate, "ambiguous follow-up rate");
  sim->add_option("--speakers", sim_args.speakers, "speakers present");
  sim->add_option("--noise", sim_args.noise, "noise band: low|med|high");
  sim->add_flag("--tv", sim_args.tv, "add a television distractor stream");
  sim->add_option("--segments-per-hour", sim_args.segments_per_hour,
                  "VAD-positive segment rate");
  sim->add_option("--scenario", sim_args.scenario,
                  "failure scenario: tv_interrogative|carry_over|overlap_command");

  // --- route ---
  RouteArgs route_args;
  auto* route = app.add_subcommand("route", "route events (or one audio file) to decisions");
  route->add_option("--events", route_args.events, "input events JSONL");
  route->add_option("--audio", route_args.audio, "input audio container file");
  route->add_option("--config", route_args.config, "deployment config JSON");
  route->add_option("--out", route_args.out, "output decisions JSONL (or - for stdout)");
  route->add_option("--modulator", route_args.modulator,
                    "context modulator: oracle|learned|ema|kofn|none");
  route->add_option("--stage3-weights", route_args.stage3_weights,
                    "modulator weight bundle (learned)");
  route->add_option("--weights", route_args.stage2_weights, "scorer weight bundle (audio path)");
  route->add_option("--evidence", route_args.evidence, "evidence model JSON");
  route->add_option("--seed", route_args.evidence_seed, "evidence model seed");
  route->add_option("--id", route_args.utterance_id, "utterance id for the audio path");
  route->add_flag("--no-stage1", route_args.no_stage1, "disable spatial front-end");
  route->add_flag("--no-stage2", route_args.no_stage2,
                  "replace scorer with fixed 0.5 confidence");
  route->add_flag("--include-latency", route_args.include_latency,
                  "emit wall-clock latency (breaks byte reproducibility)");

  // --- sweep ---
  RouteArgs sweep_args;
  double grid_start = 0.56, grid_end = 0.85, grid_step = 0.01;
  std::string sweep_format = "json";
  auto* sweep = app.add_subcommand("sweep", "precision/recall across the threshold grid");
  sweep->add_option("--events", sweep_args.events, "input events JSONL")->required();
  sweep->add_option("--config", sweep_args.config, "deployment config JSON");
  sweep->add_option("--out", sweep_args.out, "output path (or - for stdout)");
  sweep->add_option("--modulator", sweep_args.modulator, "context modulator");
  sweep->add_option("--stage3-weights", sweep_args.stage3_weights, "modulator weights");
  sweep->add_option("--evidence", sweep_args.evidence, "evidence model JSON");
  sweep->add_option("--seed", sweep_args.evidence_seed, "evidence model seed");
  sweep->add_option("--grid-start", grid_start, "first tau");
  sweep->add_option("--grid-end", grid_end, "last tau");
  sweep->add_option("--grid-step", grid_step, "tau step");
  sweep->add_option("--format", sweep_format, "json|csv|svg");

  // --- ablate ---
  int ab_seeds = 10, ab_sessions = 4, ab_speakers = 2;
  double ab_duration = 1800.0, ab_ambiguous = 0.4, ab_fraction = 0.12;
  std::string ab_noise = "low", ab_config, ab_out, ab_format = "json", ab_variant;
  std::uint64_t ab_seed_base = 1;
  auto* ablate = app.add_subcommand("ablate", "stage ablation on seeded simulator sessions");
  ablate->add_option("--out", ab_out, "output path (or - for stdout)");
  ablate->add_option("--config", ab_config, "deployment config JSON");
  ablate->add_option("--seeds", ab_seeds, "number of seeds")->check(CLI::PositiveNumber);
  ablate->add_option("--seed", ab_seed_base, "base seed");
  ablate->add_option("--sessions-per-seed", ab_sessions, "sessions per seed");
  ablate->add_option("--duration", ab_duration, "session length in seconds");
  ablate->add_option("--ambiguous-rate", ab_ambiguous, "ambiguous follow-up rate");
  ablate->add_option("--device-fraction", ab_fraction, "device-directed fraction");
  ablate->add_option("--speakers", ab_speakers, "speakers present");
  ablate->add_option("--noise", ab_noise, "noise band");
  ablate->add_option("--variant", ab_variant,
                     "run a single variant (full|no_stage1|no_stage2|no_stage3|ema|k_of_n)");
  ablate->add_option("--format", ab_format, "json|csv|svg");

  // --- cost ---
  sdar::CostInputs cost_in;
  std::string cost_out, cost_format = "json";
  auto* cost = app.add_subcommand("cost", "downstream pipeline-savings arithmetic");
  cost->add_option("--segments", cost_in.segments_per_hour, "VAD-positive segments per hour");
  cost->add_option("--fraction", cost_in.device_fraction, "device-directed fraction");
  cost->add_option("--recall", cost_in.recall, "gate recall");
  cost->add_option("--ftr", cost_in.false_trigger_rate, "false-trigger rate");
  cost->add_option("--asr-s", cost_in.asr_seconds_per_segment, "ASR seconds per segment");
  cost->add_option("--llm-usd", cost_in.llm_cost_per_call, "LLM cost per call");
  cost->add_option("--overhead-s", cost_in.gate_overhead_s_per_hour,
                   "gate overhead seconds per hour");
  cost->add_option("--out", cost_out, "output path (or - for stdout)");
  cost->add_option("--format", cost_format, "json|csv");

  // --- bench ---
  RouteArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "per-decision latency statistics");
  bench_cmd->add_option("--events", bench_args.events, "input events JSONL")->required();
  bench_cmd->add_option("--config", bench_args.config, "deployment config JSON");
  bench_cmd->add_option("--evidence", bench_args.evidence, "evidence model JSON");
  bench_cmd->add_option("--seed", bench_args.evidence_seed, "evidence model seed");
  bench_cmd->add_option("--modulator", bench_args.modulator, "context modulator");
  bench_cmd->add_option("--out", bench_args.out, "output path (or - for stdout)");

  // --- report ---
  std::string rep_input, rep_format = "csv", rep_out, rep_table = "heatmap";
  std::string rep_events, rep_decisions;
  auto* report = app.add_subcommand("report",
                                    "score decisions or render a saved JSON report");
  report->add_option("--input", rep_input, "saved report JSON");
  report->add_option("--events", rep_events, "truth events JSONL (with --decisions)");
  report->add_option("--decisions", rep_decisions, "decisions JSONL to score");
  report->add_option("--format", rep_format, "json|csv|svg");
  report->add_option("--out", rep_out, "output path (or - for stdout)");
  report->add_option("--table", rep_table, "metrics table: heatmap|confusion|speakers");

  // --- weights ---
  std::string w_arch = "stage2", w_out;
  std::uint64_t w_seed = 0;
  bool w_quantize = false;
  auto* weights = app.add_subcommand("weights", "create a seeded weight or evidence bundle");
  weights->add_option("--arch", w_arch, "stage2|stage3|evidence");
  weights->add_option("--seed", w_seed, "init seed");
  weights->add_option("--out", w_out, "output path")->required();
  weights->add_flag("--quantize", w_quantize, "store int8 per-tensor quantized weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) {
      sdar::write_events_jsonl(run_simulation(sim_args), sim_args.out);
      return 0;
    }
    if (route->parsed()) {
      return cmd_route(route_args);
    }
    if (sweep->parsed()) {
      const auto cfg = load_config_or_default(sweep_args.config);
      const auto events = sdar::read_events_jsonl(sweep_args.events);
      const auto model = load_evidence_or_standard(sweep_args.evidence, sweep_args.evidence_seed);
      const auto decisions =
          route_events(events, cfg, model, options_from_route_args(sweep_args, nullptr));
      std::vector<double> grid;
      for (int i = 0;; ++i) {
        const double t = grid_start + i * grid_step;
        if (t > grid_end + 1e-9) break;
        grid.push_back(std::round(t * 1e6) / 1e6);
      }
      const auto result = sdar::pr_sweep(scored_segments(events, decisions), grid);
      if (sweep_format == "json") {
        write_or_print(sdar::to_json(result).dump(2) + "\n", sweep_args.out);
      } else if (sweep_format == "csv") {
        if (sweep_args.out.empty()) throw std::runtime_error("sweep: csv needs --out");
        sdar::write_pr_csv(result, sweep_args.out);
      } else if (sweep_format == "svg") {
        write_or_print(sdar::pr_curve_svg(result), sweep_args.out);
      } else {
        throw std::runtime_error("sweep: unknown format " + sweep_format);
      }
      return 0;
    }
    if (ablate->parsed()) {
      const auto cfg = load_config_or_default(ab_config);
      const auto model = sdar::EvidenceModel::standard(0);
      std::vector<sdar::SessionSpec> specs;
      for (int s = 0; s < ab_seeds; ++s) {
        for (int k = 0; k < ab_sessions; ++k) {
          sdar::SessionSpec spec;
          spec.rng_seed = ab_seed_base + static_cast<std::uint64_t>(s) * 1000 + k;
          spec.duration_s = ab_duration;
          spec.ambiguous_followup_rate = ab_ambiguous;
          spec.device_fraction = ab_fraction;
          spec.speakers_present = ab_speakers;
          spec.noise_band = sdar::noise_band_from_string(ab_noise);
          specs.push_back(spec);
        }
      }
      const auto variants = ab_variant.empty()
                                ? sdar::all_ablation_variants()
                                : std::vector{sdar::variant_from_string(ab_variant)};
      const auto result = sdar::run_ablation(specs, variants, cfg, model);
      if (ab_format == "json") {
        write_or_print(sdar::to_json(result).dump(2) + "\n", ab_out);
      } else if (ab_format == "csv") {
        if (ab_out.empty()) throw std::runtime_error("ablate: csv needs --out");
        sdar::write_ablation_csv(result, ab_out);
      } else if (ab_format == "svg") {
        write_or_print(sdar::ablation_bar_svg(result), ab_out);
      } else {
        throw std::runtime_error("ablate: unknown format " + ab_format);
      }
      return 0;
    }
    if (cost->parsed()) {
      const auto report_out = sdar::cost_model(cost_in);
      if (cost_format == "json") {
        write_or_print(sdar::to_json(report_out).dump(2) + "\n", cost_out);
      } else if (cost_format == "csv") {
        std::string csv = "metric,value\n";
        const auto j = sdar::to_json(report_out);
        for (const auto& [key, value] : j.items()) {
          if (key == "kind" || key == "inputs") continue;
          csv += key + "," + value.dump() + "\n";
        }
        write_or_print(csv, cost_out);
      } else {
        throw std::runtime_error("cost: unknown format " + cost_format);
      }
      return 0;
    }
    if (bench_cmd->parsed()) {
      const auto cfg = load_config_or_default(bench_args.config);
      const auto events = sdar::read_events_jsonl(bench_args.events);
      const auto model = load_evidence_or_standard(bench_args.evidence, bench_args.evidence_seed);
      sdar::EventPipelineOptions opt;
      opt.modulator.kind = sdar::modulator_from_string(bench_args.modulator);
      const auto stats = sdar::bench(events, cfg, model, opt);
      write_or_print(sdar::to_json(stats).dump(2) + "\n", bench_args.out);
      return 0;
    }
    if (report->parsed()) {
      nlohmann::json j;
      if (!rep_decisions.empty()) {
        if (rep_events.empty()) throw std::runtime_error("report: --decisions needs --events");
        const auto truth = sdar::read_events_jsonl(rep_events);
        const auto decisions = sdar::read_decisions_jsonl(rep_decisions);
        j = sdar::to_json(sdar::score_decisions(decisions, truth));
      } else if (!rep_input.empty()) {
        std::ifstream in(rep_input);
        if (!in) throw std::runtime_error("report: cannot open " + rep_input);
        in >> j;
      } else {
        throw std::runtime_error("report: need --input or --events/--decisions");
      }
      if (rep_format == "json") {
        write_or_print(j.dump(2) + "\n", rep_out);
        return 0;
      }
      const std::string kind = j.value("kind", std::string{});
      if (kind == "pr_sweep") {
        const auto sweep_result = sdar::pr_sweep_from_json(j);
        if (rep_format == "csv") {
          if (rep_out.empty()) throw std::runtime_error("report: csv needs --out");
          sdar::write_pr_csv(sweep_result, rep_out);
        } else {
          write_or_print(sdar::pr_curve_svg(sweep_result), rep_out);
        }
      } else if (kind == "metrics") {
        const auto metrics = sdar::metrics_from_json(j);
        if (rep_format == "csv") {
          if (rep_out.empty()) throw std::runtime_error("report: csv needs --out");
          if (rep_table == "confusion") {
            sdar::write_confusion_csv(metrics, rep_out);
          } else if (rep_table == "speakers") {
            sdar::write_per_speaker_csv(metrics, rep_out);
          } else {
            sdar::write_heatmap_csv(metrics, rep_out);
          }
        } else {
          write_or_print(sdar::heatmap_svg(metrics), rep_out);
        }
      } else if (kind == "ablation") {
        const auto ablation = sdar::ablation_from_json(j);
        if (rep_format == "csv") {
          if (rep_out.empty()) throw std::runtime_error("report: csv needs --out");
          sdar::write_ablation_csv(ablation, rep_out);
        } else {
          write_or_print(sdar::ablation_bar_svg(ablation), rep_out);
        }
      } else {
        throw std::runtime_error("report: cannot render kind '" + kind + "'");
      }
      return 0;
    }
    if (weights->parsed()) {
      if (w_arch == "evidence") {
        sdar::save_evidence_model(sdar::EvidenceModel::standard(w_seed), w_out);
        return 0;
      }
      sdar::WeightBundle bundle;
      if (w_arch == "stage2") {
        bundle = sdar::Stage2Network::random(w_seed).to_bundle();
      } else if (w_arch == "stage3") {
        bundle = sdar::Stage3Network::random(w_seed).to_bundle();
      } else {
        throw std::runtime_error("weights: unknown arch " + w_arch);
      }
      if (w_quantize) bundle = sdar::quantize_int8(bundle);
      sdar::save_weights(bundle, w_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
