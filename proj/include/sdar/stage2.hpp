#pragma once

// Utterance scorer: four 1-D conv blocks (conv / batch-norm / ReLU /
// max-pool stride 2) over the mel-frame axis, a GRU over the pooled
// sequence, and a sigmoid head on the final hidden state. Shapes are frozen
// in the stage2-v1 contract (442,257 parameters).
//
// Mel inputs are shifted/scaled by (x + 10) / 10 before the first conv so
// typical log energies land near unit range; the constant is part of the
// architecture. Inference is double precision; bundles store float32 (or
// int8 + scale after quantization).

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdar/features.hpp"
#include "sdar/rng.hpp"
#include "sdar/weights.hpp"

namespace sdar {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kFeatureShift = 10.0;
inline constexpr double kFeatureScale = 10.0;

struct Stage2Score {
  double confidence = 0.0;  // in [0, 1]
  std::string utterance_id;
  double timestamp = 0.0;
};

struct ConvBlock {
  int in_ch = 0, out_ch = 0, kernel = arch::kConvKernel;
  std::vector<double> w;  // [out][in][kernel]
  std::vector<double> b;
  std::vector<double> bn_gamma, bn_beta, bn_mean, bn_var;
};

struct Stage2Network {
  std::array<ConvBlock, 4> blocks;
  std::vector<double> gru_w_ih;  // [3H][in], gate order r, z, n
  std::vector<double> gru_w_hh;  // [3H][H]
  std::vector<double> gru_b_ih;  // [3H]
  std::vector<double> gru_b_hh;  // [3H]
  std::vector<double> head_w;    // [H]
  double head_b = 0.0;

  static Stage2Network zeros() {
    Stage2Network net;
    net.init_shapes();
    for (auto& blk : net.blocks) std::fill(blk.bn_var.begin(), blk.bn_var.end(), 1.0);
    return net;
  }

  static Stage2Network random(std::uint64_t seed) {
    Stage2Network net;
    net.init_shapes();
    Rng rng(seed);
    for (auto& blk : net.blocks) {
      const double s = std::sqrt(1.0 / (blk.in_ch * blk.kernel));
      for (auto& v : blk.w) v = rng.uniform(-s, s);
      for (auto& v : blk.b) v = rng.uniform(-s, s);
      for (auto& v : blk.bn_gamma) v = rng.uniform(0.8, 1.2);
      for (auto& v : blk.bn_beta) v = rng.uniform(-0.1, 0.1);
      for (auto& v : blk.bn_mean) v = rng.uniform(-0.1, 0.1);
      for (auto& v : blk.bn_var) v = rng.uniform(0.5, 1.5);
    }
    const int in = arch::kConvChannels[4];
    const int h = arch::kGruHidden;
    const double si = std::sqrt(1.0 / in);
    const double sh = std::sqrt(1.0 / h);
    for (auto& v : net.gru_w_ih) v = rng.uniform(-si, si);
    for (auto& v : net.gru_w_hh) v = rng.uniform(-sh, sh);
    for (auto& v : net.gru_b_ih) v = rng.uniform(-sh, sh);
    for (auto& v : net.gru_b_hh) v = rng.uniform(-sh, sh);
    for (auto& v : net.head_w) v = rng.uniform(-sh, sh);
    net.head_b = rng.uniform(-sh, sh);
    return net;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& blk : blocks) {
      n += blk.w.size() + blk.b.size() + blk.bn_gamma.size() + blk.bn_beta.size() +
           blk.bn_mean.size() + blk.bn_var.size();
    }
    n += gru_w_ih.size() + gru_w_hh.size() + gru_b_ih.size() + gru_b_hh.size();
    n += head_w.size() + 1;
    return n;
  }

  void validate() const {
    for (int i = 0; i < 4; ++i) {
      const auto& blk = blocks[i];
      if (blk.in_ch != arch::kConvChannels[i] || blk.out_ch != arch::kConvChannels[i + 1]) {
        throw std::invalid_argument("stage2: conv" + std::to_string(i + 1) + " channel mismatch");
      }
      for (double v : blk.bn_var) {
        if (!(v > 0.0)) throw std::invalid_argument("stage2: batch-norm variance must be > 0");
      }
    }
  }

  // Score one utterance's mel features; output strictly inside (0, 1).
  double forward(const std::vector<MelFeatureVector>& features) const {
    if (features.empty()) throw std::invalid_argument("stage2: need at least one feature frame");
    validate();

    // x[c][t]
    std::vector<std::vector<double>> x(arch::kMelBins,
                                       std::vector<double>(features.size(), 0.0));
    for (std::size_t t = 0; t < features.size(); ++t) {
      for (int c = 0; c < arch::kMelBins; ++c) {
        x[c][t] = (features[t].values[c] + kFeatureShift) / kFeatureScale;
      }
    }

    for (const auto& blk : blocks) {
      x = conv_bn_relu_pool(blk, x);
    }

    // GRU over timesteps; PyTorch-style gate equations, order r, z, n.
    const int h_dim = arch::kGruHidden;
    const int in_dim = arch::kConvChannels[4];
    const std::size_t steps = x[0].size();
    std::vector<double> h(h_dim, 0.0);
    std::vector<double> gates_i(3 * h_dim), gates_h(3 * h_dim);
    for (std::size_t t = 0; t < steps; ++t) {
      for (int g = 0; g < 3 * h_dim; ++g) {
        double acc = gru_b_ih[g];
        const double* row = gru_w_ih.data() + static_cast<std::size_t>(g) * in_dim;
        for (int i = 0; i < in_dim; ++i) acc += row[i] * x[i][t];
        gates_i[g] = acc;
        double acc_h = gru_b_hh[g];
        const double* row_h = gru_w_hh.data() + static_cast<std::size_t>(g) * h_dim;
        for (int i = 0; i < h_dim; ++i) acc_h += row_h[i] * h[i];
        gates_h[g] = acc_h;
      }
      for (int i = 0; i < h_dim; ++i) {
        const double r = sigmoid(gates_i[i] + gates_h[i]);
        const double z = sigmoid(gates_i[h_dim + i] + gates_h[h_dim + i]);
        const double n = std::tanh(gates_i[2 * h_dim + i] + r * gates_h[2 * h_dim + i]);
        h[i] = (1.0 - z) * n + z * h[i];
      }
    }

    double logit = head_b;
    for (int i = 0; i < h_dim; ++i) logit += head_w[i] * h[i];
    return sigmoid(logit);
  }

  WeightBundle to_bundle() const {
    validate();
    WeightBundle bundle;
    bundle.arch = "stage2-v1";
    for (int i = 0; i < 4; ++i) {
      const auto& blk = blocks[i];
      const std::string p = "conv" + std::to_string(i + 1);
      bundle.append_f32(p + ".weight", {blk.out_ch, blk.in_ch, blk.kernel}, blk.w);
      bundle.append_f32(p + ".bias", {blk.out_ch}, blk.b);
      bundle.append_f32(p + ".bn.gamma", {blk.out_ch}, blk.bn_gamma);
      bundle.append_f32(p + ".bn.beta", {blk.out_ch}, blk.bn_beta);
      bundle.append_f32(p + ".bn.mean", {blk.out_ch}, blk.bn_mean);
      bundle.append_f32(p + ".bn.var", {blk.out_ch}, blk.bn_var);
    }
    const std::int64_t h = arch::kGruHidden;
    const std::int64_t in = arch::kConvChannels[4];
    bundle.append_f32("gru.w_ih", {3 * h, in}, gru_w_ih);
    bundle.append_f32("gru.w_hh", {3 * h, h}, gru_w_hh);
    bundle.append_f32("gru.b_ih", {3 * h}, gru_b_ih);
    bundle.append_f32("gru.b_hh", {3 * h}, gru_b_hh);
    bundle.append_f32("head.weight", {1, h}, head_w);
    bundle.append_f32("head.bias", {1}, {head_b});
    return bundle;
  }

  static Stage2Network from_bundle(const WeightBundle& bundle) {
    if (bundle.arch != "stage2-v1") {
      throw std::runtime_error("stage2: bundle architecture is '" + bundle.arch +
                               "', expected stage2-v1");
    }
    validate_contract(bundle);
    Stage2Network net;
    net.init_shapes();
    for (int i = 0; i < 4; ++i) {
      auto& blk = net.blocks[i];
      const std::string p = "conv" + std::to_string(i + 1);
      blk.w = bundle.tensor(p + ".weight");
      blk.b = bundle.tensor(p + ".bias");
      blk.bn_gamma = bundle.tensor(p + ".bn.gamma");
      blk.bn_beta = bundle.tensor(p + ".bn.beta");
      blk.bn_mean = bundle.tensor(p + ".bn.mean");
      blk.bn_var = bundle.tensor(p + ".bn.var");
    }
    net.gru_w_ih = bundle.tensor("gru.w_ih");
    net.gru_w_hh = bundle.tensor("gru.w_hh");
    net.gru_b_ih = bundle.tensor("gru.b_ih");
    net.gru_b_hh = bundle.tensor("gru.b_hh");
    net.head_w = bundle.tensor("head.weight");
    net.head_b = bundle.tensor("head.bias")[0];
    net.validate();
    return net;
  }

  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

 private:
  void init_shapes() {
    for (int i = 0; i < 4; ++i) {
      auto& blk = blocks[i];
      blk.in_ch = arch::kConvChannels[i];
      blk.out_ch = arch::kConvChannels[i + 1];
      blk.kernel = arch::kConvKernel;
      blk.w.assign(static_cast<std::size_t>(blk.out_ch) * blk.in_ch * blk.kernel, 0.0);
      blk.b.assign(blk.out_ch, 0.0);
      blk.bn_gamma.assign(blk.out_ch, 0.0);
      blk.bn_beta.assign(blk.out_ch, 0.0);
      blk.bn_mean.assign(blk.out_ch, 0.0);
      blk.bn_var.assign(blk.out_ch, 1.0);
    }
    const int h = arch::kGruHidden;
    const int in = arch::kConvChannels[4];
    gru_w_ih.assign(static_cast<std::size_t>(3 * h) * in, 0.0);
    gru_w_hh.assign(static_cast<std::size_t>(3 * h) * h, 0.0);
    gru_b_ih.assign(3 * h, 0.0);
    gru_b_hh.assign(3 * h, 0.0);
    head_w.assign(h, 0.0);
    head_b = 0.0;
  }

  // Same-padded conv1d + batch-norm + ReLU + max-pool (kernel 2, stride 2,
  // ceil mode so length-1 inputs survive all four blocks).
  static std::vector<std::vector<double>> conv_bn_relu_pool(
      const ConvBlock& blk, const std::vector<std::vector<double>>& x) {
    const std::size_t t_in = x[0].size();
    const int pad = blk.kernel / 2;
    std::vector<std::vector<double>> y(blk.out_ch, std::vector<double>(t_in, 0.0));
    for (int o = 0; o < blk.out_ch; ++o) {
      const double inv_std = 1.0 / std::sqrt(blk.bn_var[o] + kBatchNormEps);
      for (std::size_t t = 0; t < t_in; ++t) {
        double acc = blk.b[o];
        for (int i = 0; i < blk.in_ch; ++i) {
          const double* wrow =
              blk.w.data() + (static_cast<std::size_t>(o) * blk.in_ch + i) * blk.kernel;
          for (int k = 0; k < blk.kernel; ++k) {
            const long src = static_cast<long>(t) + k - pad;
            if (src >= 0 && src < static_cast<long>(t_in)) acc += wrow[k] * x[i][src];
          }
        }
        double v = (acc - blk.bn_mean[o]) * inv_std * blk.bn_gamma[o] + blk.bn_beta[o];
        y[o][t] = v > 0.0 ? v : 0.0;
      }
    }
    const std::size_t t_out = (t_in + 1) / 2;
    std::vector<std::vector<double>> pooled(blk.out_ch, std::vector<double>(t_out, 0.0));
    for (int o = 0; o < blk.out_ch; ++o) {
      for (std::size_t t = 0; t < t_out; ++t) {
        const std::size_t a = 2 * t;
        const std::size_t b = 2 * t + 1;
        pooled[o][t] = b < t_in ? std::max(y[o][a], y[o][b]) : y[o][a];
      }
    }
    return pooled;
  }
};

inline Stage2Score stage2_forward(const std::vector<MelFeatureVector>& features,
                                  const Stage2Network& net, const std::string& utterance_id = "",
                                  double timestamp = 0.0) {
  return Stage2Score{net.forward(features), utterance_id, timestamp};
}

}  // namespace sdar
