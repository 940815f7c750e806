#pragma once

// Causal interaction-state modulation. The context window holds (confidence,
// VAD state, time-delta) tuples for the last 8 seconds; a modulator turns the
// window plus the current score into a multiplicative prior alpha in [0, 1]:
//   c' = alpha * c
// so modulation can attenuate or preserve confidence, never amplify it.
//
// Modulators:
//   - learned: one-block causal transformer (stage3-v1, 86,185 parameters),
//     prediction read at the last timestep
//   - ema: exponential moving average of window confidences
//   - k-of-n: pass iff >= k of the last n window scores exceed a bar

#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "sdar/rng.hpp"
#include "sdar/weights.hpp"

namespace sdar {

struct ContextTuple {
  double confidence = 0.0;
  bool vad_active = false;
  double delta_t = 0.0;  // seconds since previous tuple, >= 0

  void validate() const {
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
      throw std::invalid_argument("ContextTuple: confidence outside [0, 1]");
    }
    if (!(delta_t >= 0.0)) throw std::invalid_argument("ContextTuple: negative delta_t");
  }
};

// Rolling context window with natural expiry. Time must be non-decreasing;
// a push with an earlier timestamp is a causality error.
class ContextWindow {
 public:
  explicit ContextWindow(double horizon_s = 8.0) : horizon_(horizon_s) {
    if (!(horizon_s > 0.0)) throw std::invalid_argument("ContextWindow: horizon must be > 0");
  }

  void push(const ContextTuple& tuple, double now) {
    tuple.validate();
    if (has_now_ && now < now_) {
      throw std::invalid_argument("ContextWindow: time regression (now < window.now)");
    }
    now_ = now;
    has_now_ = true;
    items_.push_back({now, tuple});
    evict(now);
  }

  // Advances the clock (evicting expired tuples) without adding a tuple.
  void advance(double now) {
    if (has_now_ && now < now_) {
      throw std::invalid_argument("ContextWindow: time regression (now < window.now)");
    }
    now_ = now;
    has_now_ = true;
    evict(now);
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  double now() const { return now_; }
  double horizon() const { return horizon_; }

  double time_at(std::size_t i) const { return items_[i].first; }
  const ContextTuple& tuple_at(std::size_t i) const { return items_[i].second; }

  double last_time() const { return items_.empty() ? now_ : items_.back().first; }

 private:
  void evict(double now) {
    while (!items_.empty() && now - items_.front().first > horizon_) items_.pop_front();
  }

  double horizon_;
  double now_ = 0.0;
  bool has_now_ = false;
  std::deque<std::pair<double, ContextTuple>> items_;
};

struct ModulatorOutput {
  double alpha = 1.0;
  double modulated_confidence = 0.0;
};

// Functional push: returns the window with the tuple appended and expired
// entries evicted. The in-place ContextWindow::push is what pipelines use.
inline ContextWindow window_push(ContextWindow window, const ContextTuple& tuple, double now) {
  window.push(tuple, now);
  return window;
}

// ---------------------------------------------------------------------------
// Learned modulator
// ---------------------------------------------------------------------------

struct Stage3Network {
  std::vector<double> embed_w;  // [D][3]
  std::vector<double> embed_b;  // [D]
  std::vector<double> ln1_gamma, ln1_beta;
  std::vector<double> wq, bq, wk, bk, wv, bv, wo, bo;  // [D][D] / [D]
  std::vector<double> ln2_gamma, ln2_beta;
  std::vector<double> ffn_w1, ffn_b1;  // [F][D] / [F]
  std::vector<double> ffn_w2, ffn_b2;  // [D][F] / [D]
  std::vector<double> head_w;          // [D]
  double head_b = 0.0;

  static Stage3Network zeros() {
    Stage3Network net;
    net.init_shapes();
    return net;
  }

  static Stage3Network random(std::uint64_t seed) {
    Stage3Network net;
    net.init_shapes();
    Rng rng(seed);
    const double s = std::sqrt(1.0 / arch::kModelDim);
    auto fill = [&](std::vector<double>& v, double scale) {
      for (auto& x : v) x = rng.uniform(-scale, scale);
    };
    fill(net.embed_w, 0.5);
    fill(net.embed_b, 0.1);
    for (auto& v : net.ln1_gamma) v = rng.uniform(0.8, 1.2);
    fill(net.ln1_beta, 0.1);
    fill(net.wq, s);
    fill(net.bq, 0.05);
    fill(net.wk, s);
    fill(net.bk, 0.05);
    fill(net.wv, s);
    fill(net.bv, 0.05);
    fill(net.wo, s);
    fill(net.bo, 0.05);
    for (auto& v : net.ln2_gamma) v = rng.uniform(0.8, 1.2);
    fill(net.ln2_beta, 0.1);
    fill(net.ffn_w1, s);
    fill(net.ffn_b1, 0.05);
    fill(net.ffn_w2, std::sqrt(1.0 / arch::kFfDim));
    fill(net.ffn_b2, 0.05);
    fill(net.head_w, s);
    net.head_b = rng.uniform(-0.05, 0.05);
    return net;
  }

  std::size_t param_count() const {
    return embed_w.size() + embed_b.size() + ln1_gamma.size() + ln1_beta.size() + wq.size() +
           bq.size() + wk.size() + bk.size() + wv.size() + bv.size() + wo.size() + bo.size() +
           ln2_gamma.size() + ln2_beta.size() + ffn_w1.size() + ffn_b1.size() + ffn_w2.size() +
           ffn_b2.size() + head_w.size() + 1;
  }

  // Per-position sigmoid outputs under a strict causal mask; the modulator
  // reads the last entry. Exposing all positions lets tests assert that
  // appending tokens never changes earlier outputs.
  std::vector<double> forward_alphas(const std::vector<std::array<double, 3>>& tokens) const {
    if (tokens.empty()) throw std::invalid_argument("stage3: empty token sequence");
    const int d = arch::kModelDim;
    const int heads = arch::kHeads;
    const int hd = d / heads;
    const int f = arch::kFfDim;
    const std::size_t n = tokens.size();

    std::vector<std::vector<double>> x(n, std::vector<double>(d, 0.0));
    for (std::size_t t = 0; t < n; ++t) {
      for (int i = 0; i < d; ++i) {
        double acc = embed_b[i];
        for (int j = 0; j < 3; ++j) acc += embed_w[static_cast<std::size_t>(i) * 3 + j] * tokens[t][j];
        x[t][i] = acc;
      }
    }

    // Pre-norm attention block.
    std::vector<std::vector<double>> normed(n);
    for (std::size_t t = 0; t < n; ++t) normed[t] = layer_norm(x[t], ln1_gamma, ln1_beta);

    std::vector<std::vector<double>> q(n), k(n), v(n);
    for (std::size_t t = 0; t < n; ++t) {
      q[t] = affine(wq, bq, normed[t], d, d);
      k[t] = affine(wk, bk, normed[t], d, d);
      v[t] = affine(wv, bv, normed[t], d, d);
    }

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<double> scores;
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> attn_out(d, 0.0);
      for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        scores.assign(t + 1, 0.0);
        double max_s = -1e300;
        for (std::size_t j = 0; j <= t; ++j) {  // causal mask: keys at <= t only
          double s = 0.0;
          for (int e = 0; e < hd; ++e) s += q[t][off + e] * k[j][off + e];
          s *= inv_sqrt;
          scores[j] = s;
          if (s > max_s) max_s = s;
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= t; ++j) {
          scores[j] = std::exp(scores[j] - max_s);
          z += scores[j];
        }
        for (std::size_t j = 0; j <= t; ++j) {
          const double w = scores[j] / z;
          for (int e = 0; e < hd; ++e) attn_out[off + e] += w * v[j][off + e];
        }
      }
      const auto proj = affine(wo, bo, attn_out, d, d);
      for (int i = 0; i < d; ++i) x[t][i] += proj[i];
    }

    std::vector<double> alphas(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const auto normed2 = layer_norm(x[t], ln2_gamma, ln2_beta);
      auto hidden = affine(ffn_w1, ffn_b1, normed2, f, d);
      for (auto& hval : hidden) hval = hval > 0.0 ? hval : 0.0;
      const auto out = affine(ffn_w2, ffn_b2, hidden, d, f);
      double logit = head_b;
      for (int i = 0; i < d; ++i) logit += head_w[i] * (x[t][i] + out[i]);
      alphas[t] = 1.0 / (1.0 + std::exp(-logit));
    }
    return alphas;
  }

  WeightBundle to_bundle() const {
    WeightBundle bundle;
    bundle.arch = "stage3-v1";
    const std::int64_t d = arch::kModelDim;
    const std::int64_t f = arch::kFfDim;
    bundle.append_f32("embed.weight", {d, arch::kTupleDim}, embed_w);
    bundle.append_f32("embed.bias", {d}, embed_b);
    bundle.append_f32("ln1.gamma", {d}, ln1_gamma);
    bundle.append_f32("ln1.beta", {d}, ln1_beta);
    bundle.append_f32("attn.wq", {d, d}, wq);
    bundle.append_f32("attn.bq", {d}, bq);
    bundle.append_f32("attn.wk", {d, d}, wk);
    bundle.append_f32("attn.bk", {d}, bk);
    bundle.append_f32("attn.wv", {d, d}, wv);
    bundle.append_f32("attn.bv", {d}, bv);
    bundle.append_f32("attn.wo", {d, d}, wo);
    bundle.append_f32("attn.bo", {d}, bo);
    bundle.append_f32("ln2.gamma", {d}, ln2_gamma);
    bundle.append_f32("ln2.beta", {d}, ln2_beta);
    bundle.append_f32("ffn.w1", {f, d}, ffn_w1);
    bundle.append_f32("ffn.b1", {f}, ffn_b1);
    bundle.append_f32("ffn.w2", {d, f}, ffn_w2);
    bundle.append_f32("ffn.b2", {d}, ffn_b2);
    bundle.append_f32("head.weight", {1, d}, head_w);
    bundle.append_f32("head.bias", {1}, {head_b});
    return bundle;
  }

  static Stage3Network from_bundle(const WeightBundle& bundle) {
    if (bundle.arch != "stage3-v1") {
      throw std::runtime_error("stage3: bundle architecture is '" + bundle.arch +
                               "', expected stage3-v1");
    }
    validate_contract(bundle);
    Stage3Network net;
    net.embed_w = bundle.tensor("embed.weight");
    net.embed_b = bundle.tensor("embed.bias");
    net.ln1_gamma = bundle.tensor("ln1.gamma");
    net.ln1_beta = bundle.tensor("ln1.beta");
    net.wq = bundle.tensor("attn.wq");
    net.bq = bundle.tensor("attn.bq");
    net.wk = bundle.tensor("attn.wk");
    net.bk = bundle.tensor("attn.bk");
    net.wv = bundle.tensor("attn.wv");
    net.bv = bundle.tensor("attn.bv");
    net.wo = bundle.tensor("attn.wo");
    net.bo = bundle.tensor("attn.bo");
    net.ln2_gamma = bundle.tensor("ln2.gamma");
    net.ln2_beta = bundle.tensor("ln2.beta");
    net.ffn_w1 = bundle.tensor("ffn.w1");
    net.ffn_b1 = bundle.tensor("ffn.b1");
    net.ffn_w2 = bundle.tensor("ffn.w2");
    net.ffn_b2 = bundle.tensor("ffn.b2");
    net.head_w = bundle.tensor("head.weight");
    net.head_b = bundle.tensor("head.bias")[0];
    return net;
  }

 private:
  void init_shapes() {
    const int d = arch::kModelDim;
    const int f = arch::kFfDim;
    embed_w.assign(static_cast<std::size_t>(d) * 3, 0.0);
    embed_b.assign(d, 0.0);
    ln1_gamma.assign(d, 0.0);
    ln1_beta.assign(d, 0.0);
    wq.assign(static_cast<std::size_t>(d) * d, 0.0);
    bq.assign(d, 0.0);
    wk.assign(static_cast<std::size_t>(d) * d, 0.0);
    bk.assign(d, 0.0);
    wv.assign(static_cast<std::size_t>(d) * d, 0.0);
    bv.assign(d, 0.0);
    wo.assign(static_cast<std::size_t>(d) * d, 0.0);
    bo.assign(d, 0.0);
    ln2_gamma.assign(d, 0.0);
    ln2_beta.assign(d, 0.0);
    ffn_w1.assign(static_cast<std::size_t>(f) * d, 0.0);
    ffn_b1.assign(f, 0.0);
    ffn_w2.assign(static_cast<std::size_t>(d) * f, 0.0);
    ffn_b2.assign(d, 0.0);
    head_w.assign(d, 0.0);
    head_b = 0.0;
  }

  static std::vector<double> layer_norm(const std::vector<double>& x,
                                        const std::vector<double>& gamma,
                                        const std::vector<double>& beta) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= x.size();
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= x.size();
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
    return out;
  }

  static std::vector<double> affine(const std::vector<double>& w, const std::vector<double>& b,
                                    const std::vector<double>& x, int rows, int cols) {
    std::vector<double> out(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      double acc = b[r];
      const double* row = w.data() + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
      out[r] = acc;
    }
    return out;
  }
};

// Tuple encoding shared by the learned path and its reference oracle:
// confidence as-is, VAD as 0/1, delta clipped to [0, 8] and divided by 8.
inline std::array<double, 3> encode_tuple(const ContextTuple& t) {
  return {t.confidence, t.vad_active ? 1.0 : 0.0, std::clamp(t.delta_t, 0.0, 8.0) / 8.0};
}

inline ModulatorOutput modulate_learned(const ContextWindow& window, double current_confidence,
                                        double now, const Stage3Network& net) {
  std::vector<std::array<double, 3>> tokens;
  tokens.reserve(window.size() + 1);
  for (std::size_t i = 0; i < window.size(); ++i) tokens.push_back(encode_tuple(window.tuple_at(i)));
  const double dt = window.empty() ? 0.0 : std::max(0.0, now - window.last_time());
  tokens.push_back(encode_tuple(ContextTuple{current_confidence, true, dt}));
  const double alpha = net.forward_alphas(tokens).back();
  return {alpha, alpha * current_confidence};
}

// Exponential moving average baseline: alpha is the EMA over window
// confidences (seeded with the first one); an empty window passes through.
inline ModulatorOutput modulate_ema(const ContextWindow& window, double current_confidence,
                                    double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("modulate_ema: lambda must be in (0, 1]");
  }
  double alpha = 1.0;
  if (!window.empty()) {
    alpha = window.tuple_at(0).confidence;
    for (std::size_t i = 1; i < window.size(); ++i) {
      alpha = lambda * window.tuple_at(i).confidence + (1.0 - lambda) * alpha;
    }
  }
  const double modulated = std::clamp(alpha * current_confidence, 0.0, 1.0);
  return {alpha, modulated};
}

// k-of-n rule: pass (alpha 1) iff at least k of the last n window scores
// exceed the bar; an empty or short window that cannot reach k denies.
inline ModulatorOutput modulate_k_of_n(const ContextWindow& window, double current_confidence,
                                       int k, int n, double bar) {
  if (k < 1 || n < k) throw std::invalid_argument("modulate_k_of_n: need 1 <= k <= n");
  int above = 0;
  const std::size_t take = std::min<std::size_t>(n, window.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto& t = window.tuple_at(window.size() - 1 - i);
    if (t.confidence > bar) ++above;
  }
  const double alpha = above >= k ? 1.0 : 0.0;
  return {alpha, alpha * current_confidence};
}

}  // namespace sdar
