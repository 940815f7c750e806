#pragma once

// Report rendering: CSV tables and self-contained SVG charts (PR curve with
// highlighted operating points, condition heatmap, ablation bars). No
// external assets; output bytes are deterministic for identical inputs.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdar/eval.hpp"

namespace sdar {

namespace detail {

inline std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string svg_header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string svg_text(double x, double y, const std::string& s, int size = 12,
                            const std::string& anchor = "start") {
  return "<text x=\"" + fmt(x, 1) + "\" y=\"" + fmt(y, 1) + "\" font-family=\"sans-serif\"" +
         " font-size=\"" + std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + s +
         "</text>\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void write_pr_csv(const PrSweepResult& sweep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  out << "tau,precision,recall,f1,false_trigger_rate\n";
  for (const auto& p : sweep.points) {
    out << detail::fmt(p.tau, 2) << ',' << detail::fmt(p.precision) << ','
        << detail::fmt(p.recall) << ',' << detail::fmt(p.f1) << ','
        << detail::fmt(p.false_trigger_rate) << '\n';
  }
}

// Condition heatmap: 3 noise rows x 4 speaker columns of F1.
inline void write_heatmap_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  out << "noise_band,speakers_1,speakers_2,speakers_3,speakers_4\n";
  for (int n = 0; n < 3; ++n) {
    out << to_string(static_cast<NoiseBand>(n));
    for (int s = 1; s <= 4; ++s) {
      const auto it = report.per_condition.find({s, static_cast<NoiseBand>(n)});
      out << ',';
      if (it != report.per_condition.end()) out << detail::fmt(it->second.f1);
    }
    out << '\n';
  }
}

// Per-speaker-count table, pooled over noise bands.
inline void write_per_speaker_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  out << "speakers_present,precision,recall,f1\n";
  for (const auto& [speakers, v] : report.per_speaker) {
    out << speakers << ',' << detail::fmt(v.precision) << ',' << detail::fmt(v.recall) << ','
        << detail::fmt(v.f1) << '\n';
  }
}

inline void write_confusion_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  out << "true_label,pred_silent,pred_person,pred_device\n";
  const char* rows[3] = {"silent", "person", "device"};
  for (int r = 0; r < 3; ++r) {
    out << rows[r];
    for (int c = 0; c < 3; ++c) out << ',' << detail::fmt(report.confusion[r][c], 2);
    out << '\n';
  }
}

inline void write_ablation_csv(const AblationResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  out << "variant,precision,recall,f1,false_trigger_rate\n";
  for (const auto& [variant, report] : result.reports) {
    out << to_string(variant) << ',' << detail::fmt(report.precision) << ','
        << detail::fmt(report.recall) << ',' << detail::fmt(report.f1) << ','
        << detail::fmt(report.false_trigger_rate) << '\n';
  }
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

// PR curve over the sweep grid. Operating points in `highlight_taus` get
// filled markers (squares), others none.
inline std::string pr_curve_svg(const PrSweepResult& sweep,
                                const std::vector<double>& highlight_taus = {0.70, 0.82}) {
  const int w = 480, h = 420, m = 50;
  const double plot_w = w - 2 * m, plot_h = h - 2 * m;
  auto px = [&](double recall) { return m + recall * plot_w; };
  auto py = [&](double precision) { return h - m - precision * plot_h; };

  std::string svg = detail::svg_header(w, h);
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    svg += "<line x1=\"" + detail::fmt(px(v), 1) + "\" y1=\"" + detail::fmt(py(0), 1) +
           "\" x2=\"" + detail::fmt(px(v), 1) + "\" y2=\"" + detail::fmt(py(1), 1) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<line x1=\"" + detail::fmt(px(0), 1) + "\" y1=\"" + detail::fmt(py(v), 1) +
           "\" x2=\"" + detail::fmt(px(1), 1) + "\" y2=\"" + detail::fmt(py(v), 1) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += detail::svg_text(px(v), h - m + 16, detail::fmt(v, 2), 10, "middle");
    svg += detail::svg_text(m - 6, py(v) + 4, detail::fmt(v, 2), 10, "end");
  }

  std::string poly = "<polyline fill=\"none\" stroke=\"#2266aa\" stroke-width=\"1.5\" points=\"";
  for (const auto& p : sweep.points) {
    poly += detail::fmt(px(p.recall), 1) + "," + detail::fmt(py(p.precision), 1) + " ";
  }
  poly += "\"/>\n";
  svg += poly;

  for (const auto& p : sweep.points) {
    bool highlighted = false;
    for (double tau : highlight_taus) {
      if (std::abs(p.tau - tau) < 1e-9) highlighted = true;
    }
    if (!highlighted) continue;
    svg += "<rect x=\"" + detail::fmt(px(p.recall) - 4, 1) + "\" y=\"" +
           detail::fmt(py(p.precision) - 4, 1) +
           "\" width=\"8\" height=\"8\" fill=\"#cc5500\"/>\n";
    svg += detail::svg_text(px(p.recall) + 6, py(p.precision) - 6,
                            "tau=" + detail::fmt(p.tau, 2), 10);
  }

  svg += detail::svg_text(w / 2.0, h - 12, "recall", 12, "middle");
  svg += detail::svg_text(14, h / 2.0, "precision", 12, "middle");
  svg += detail::svg_text(w / 2.0, 20,
                          "precision-recall, AP=" + detail::fmt(sweep.average_precision, 3), 12,
                          "middle");
  svg += "</svg>\n";
  return svg;
}

inline std::string heatmap_svg(const MetricsReport& report) {
  const int cell = 80, m = 70, w = m + 4 * cell + 20, h = m + 3 * cell + 20;
  std::string svg = detail::svg_header(w, h);
  svg += detail::svg_text(w / 2.0, 20, "F1 by noise band x speakers present", 12, "middle");
  for (int s = 1; s <= 4; ++s) {
    svg += detail::svg_text(m + (s - 0.5) * cell, m - 8, std::to_string(s) + " spk", 11, "middle");
  }
  for (int n = 0; n < 3; ++n) {
    svg += detail::svg_text(m - 8, m + (n + 0.55) * cell, to_string(static_cast<NoiseBand>(n)),
                            11, "end");
    for (int s = 1; s <= 4; ++s) {
      const auto it = report.per_condition.find({s, static_cast<NoiseBand>(n)});
      const double f1 = it != report.per_condition.end() ? it->second.f1 : 0.0;
      const int green = static_cast<int>(80 + 160 * f1);
      const int red = static_cast<int>(230 - 140 * f1);
      char color[16];
      std::snprintf(color, sizeof(color), "#%02x%02x50", red, green);
      svg += "<rect x=\"" + std::to_string(m + (s - 1) * cell) + "\" y=\"" +
             std::to_string(m + n * cell) + "\" width=\"" + std::to_string(cell) +
             "\" height=\"" + std::to_string(cell) + "\" fill=\"" + color +
             "\" stroke=\"#555555\"/>\n";
      svg += detail::svg_text(m + (s - 0.5) * cell, m + (n + 0.55) * cell, detail::fmt(f1, 2),
                              12, "middle");
    }
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string ablation_bar_svg(const AblationResult& result) {
  const int bar_h = 28, gap = 12, m = 110, w = 480;
  const int n = static_cast<int>(result.reports.size());
  const int h = 60 + n * (bar_h + gap);
  std::string svg = detail::svg_header(w, h);
  svg += detail::svg_text(w / 2.0, 24, "F1 by ablation variant", 12, "middle");
  int row = 0;
  for (const auto& [variant, report] : result.reports) {
    const double y = 44 + row * (bar_h + gap);
    const double len = (w - m - 30) * report.f1;
    svg += detail::svg_text(m - 8, y + bar_h * 0.65, to_string(variant), 11, "end");
    svg += "<rect x=\"" + std::to_string(m) + "\" y=\"" + detail::fmt(y, 1) + "\" width=\"" +
           detail::fmt(len, 1) + "\" height=\"" + std::to_string(bar_h) +
           "\" fill=\"#2266aa\"/>\n";
    svg += detail::svg_text(m + len + 6, y + bar_h * 0.65, detail::fmt(report.f1, 3), 11);
    ++row;
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_text_file(const std::string& content, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  out << content;
}

}  // namespace sdar
