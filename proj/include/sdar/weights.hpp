#pragma once

// Weight-bundle container and file format shared by the utterance scorer and
// the context modulator.
//
// File layout (all integers little-endian):
//   8 bytes   magic "SDARWGT1"
//   4 bytes   CRC-32 of the blob
//   4 bytes   manifest length in bytes
//   N bytes   UTF-8 JSON manifest {"arch": ..., "tensors": [...]}
//   M bytes   blob (tensor data, row-major, little-endian)
//
// Tensors are float32 or int8 with a per-tensor scale. Bundles tagged with a
// known architecture id are validated against that architecture's exact
// tensor list on load.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdar/crc32.hpp"

namespace sdar {

enum class DType { kF32, kI8 };

inline const char* to_string(DType t) { return t == DType::kF32 ? "f32" : "i8"; }

inline DType dtype_from_string(const std::string& s) {
  if (s == "f32") return DType::kF32;
  if (s == "i8") return DType::kI8;
  throw std::runtime_error("weights: unknown dtype: " + s);
}

struct TensorEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  DType dtype = DType::kF32;
  double scale = 1.0;  // int8 dequantization scale
  std::uint64_t offset = 0;

  std::size_t elem_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
  std::size_t byte_size() const { return elem_count() * (dtype == DType::kF32 ? 4 : 1); }
};

struct WeightBundle {
  std::string arch;  // "", "stage2-v1", "stage3-v1"
  std::vector<TensorEntry> manifest;
  std::vector<std::uint8_t> blob;

  const TensorEntry* find(const std::string& name) const {
    for (const auto& t : manifest) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  const TensorEntry& require(const std::string& name) const {
    const TensorEntry* t = find(name);
    if (!t) throw std::runtime_error("weights: missing tensor: " + name);
    return *t;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& t : manifest) n += t.elem_count();
    return n;
  }

  void append_f32(const std::string& name, std::vector<std::int64_t> shape,
                  const std::vector<double>& values) {
    TensorEntry e{name, std::move(shape), DType::kF32, 1.0, blob.size()};
    if (e.elem_count() != values.size()) {
      throw std::invalid_argument("weights: shape/value count mismatch for " + name);
    }
    for (double v : values) {
      float f = static_cast<float>(v);
      std::uint8_t raw[4];
      std::memcpy(raw, &f, 4);
      blob.insert(blob.end(), raw, raw + 4);
    }
    manifest.push_back(std::move(e));
  }

  void append_i8(const std::string& name, std::vector<std::int64_t> shape,
                 const std::vector<std::int8_t>& values, double scale) {
    TensorEntry e{name, std::move(shape), DType::kI8, scale, blob.size()};
    if (e.elem_count() != values.size()) {
      throw std::invalid_argument("weights: shape/value count mismatch for " + name);
    }
    for (std::int8_t v : values) blob.push_back(static_cast<std::uint8_t>(v));
    manifest.push_back(std::move(e));
  }

  // Tensor data widened to double (int8 entries are dequantized).
  std::vector<double> tensor(const std::string& name) const {
    const TensorEntry& e = require(name);
    if (e.offset + e.byte_size() > blob.size()) {
      throw std::runtime_error("weights: tensor " + name + " extends past blob end");
    }
    std::vector<double> out(e.elem_count());
    if (e.dtype == DType::kF32) {
      for (std::size_t i = 0; i < out.size(); ++i) {
        float f;
        std::memcpy(&f, blob.data() + e.offset + 4 * i, 4);
        out[i] = static_cast<double>(f);
      }
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) {
        auto q = static_cast<std::int8_t>(blob[e.offset + i]);
        out[i] = static_cast<double>(q) * e.scale;
      }
    }
    return out;
  }

  void validate_layout() const {
    for (const auto& t : manifest) {
      if (t.offset + t.byte_size() > blob.size()) {
        throw std::runtime_error("weights: tensor " + t.name + " extends past blob end");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Architecture contracts
// ---------------------------------------------------------------------------
// The concrete shapes are frozen here; both networks and their bundle
// serialization are built from these tables.

namespace arch {

// Utterance scorer: 4 conv blocks (conv1d / batch-norm / ReLU / max-pool
// stride 2) + GRU + sigmoid head. 442,257 parameters.
inline constexpr int kMelBins = 64;
inline constexpr int kConvKernel = 5;
inline constexpr int kConvChannels[5] = {64, 128, 128, 128, 160};
inline constexpr int kGruHidden = 144;

// Context modulator: tuple embedding + one 2-head causal self-attention
// block + sigmoid head. 86,185 parameters.
inline constexpr int kTupleDim = 3;
inline constexpr int kModelDim = 84;
inline constexpr int kHeads = 2;
inline constexpr int kFfDim = 336;

inline const std::vector<TensorEntry>& stage2_contract() {
  static const std::vector<TensorEntry> contract = [] {
    std::vector<TensorEntry> c;
    for (int b = 0; b < 4; ++b) {
      const std::int64_t in = kConvChannels[b];
      const std::int64_t out = kConvChannels[b + 1];
      const std::string p = "conv" + std::to_string(b + 1);
      c.push_back({p + ".weight", {out, in, kConvKernel}});
      c.push_back({p + ".bias", {out}});
      c.push_back({p + ".bn.gamma", {out}});
      c.push_back({p + ".bn.beta", {out}});
      c.push_back({p + ".bn.mean", {out}});
      c.push_back({p + ".bn.var", {out}});
    }
    const std::int64_t h = kGruHidden;
    const std::int64_t in = kConvChannels[4];
    c.push_back({"gru.w_ih", {3 * h, in}});
    c.push_back({"gru.w_hh", {3 * h, h}});
    c.push_back({"gru.b_ih", {3 * h}});
    c.push_back({"gru.b_hh", {3 * h}});
    c.push_back({"head.weight", {1, h}});
    c.push_back({"head.bias", {1}});
    return c;
  }();
  return contract;
}

inline const std::vector<TensorEntry>& stage3_contract() {
  static const std::vector<TensorEntry> contract = [] {
    const std::int64_t d = kModelDim;
    const std::int64_t f = kFfDim;
    std::vector<TensorEntry> c;
    c.push_back({"embed.weight", {d, kTupleDim}});
    c.push_back({"embed.bias", {d}});
    c.push_back({"ln1.gamma", {d}});
    c.push_back({"ln1.beta", {d}});
    c.push_back({"attn.wq", {d, d}});
    c.push_back({"attn.bq", {d}});
    c.push_back({"attn.wk", {d, d}});
    c.push_back({"attn.bk", {d}});
    c.push_back({"attn.wv", {d, d}});
    c.push_back({"attn.bv", {d}});
    c.push_back({"attn.wo", {d, d}});
    c.push_back({"attn.bo", {d}});
    c.push_back({"ln2.gamma", {d}});
    c.push_back({"ln2.beta", {d}});
    c.push_back({"ffn.w1", {f, d}});
    c.push_back({"ffn.b1", {f}});
    c.push_back({"ffn.w2", {d, f}});
    c.push_back({"ffn.b2", {d}});
    c.push_back({"head.weight", {1, d}});
    c.push_back({"head.bias", {1}});
    return c;
  }();
  return contract;
}

}  // namespace arch

inline void validate_contract(const WeightBundle& bundle) {
  const std::vector<TensorEntry>* contract = nullptr;
  if (bundle.arch == "stage2-v1") {
    contract = &arch::stage2_contract();
  } else if (bundle.arch == "stage3-v1") {
    contract = &arch::stage3_contract();
  } else if (bundle.arch.empty()) {
    return;  // untagged bundle, layout check only
  } else {
    throw std::runtime_error("weights: unknown architecture: " + bundle.arch);
  }
  if (bundle.manifest.size() != contract->size()) {
    throw std::runtime_error("weights: " + bundle.arch + " expects " +
                             std::to_string(contract->size()) + " tensors, got " +
                             std::to_string(bundle.manifest.size()));
  }
  for (const auto& expected : *contract) {
    const TensorEntry* got = bundle.find(expected.name);
    if (!got) throw std::runtime_error("weights: missing tensor: " + expected.name);
    if (got->shape != expected.shape) {
      std::string want, have;
      for (auto d : expected.shape) want += std::to_string(d) + ",";
      for (auto d : got->shape) have += std::to_string(d) + ",";
      throw std::runtime_error("weights: shape mismatch for " + expected.name +
                               ": expected [" + want + "] got [" + have + "]");
    }
  }
}

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

inline constexpr char kWeightMagic[8] = {'S', 'D', 'A', 'R', 'W', 'G', 'T', '1'};

inline void save_weights(const WeightBundle& bundle, const std::string& path) {
  bundle.validate_layout();
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : bundle.manifest) {
    nlohmann::json e{{"name", t.name}, {"shape", t.shape}, {"dtype", to_string(t.dtype)},
                     {"offset", t.offset}};
    if (t.dtype == DType::kI8) e["scale"] = t.scale;
    tensors.push_back(std::move(e));
  }
  const std::string manifest = nlohmann::json{{"arch", bundle.arch},
                                              {"tensors", tensors}}.dump();
  const std::uint32_t crc = crc32(bundle.blob.data(), bundle.blob.size());
  const auto mlen = static_cast<std::uint32_t>(manifest.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("weights: cannot write " + path);
  out.write(kWeightMagic, 8);
  unsigned char hdr[8];
  for (int i = 0; i < 4; ++i) hdr[i] = static_cast<unsigned char>((crc >> (8 * i)) & 0xffu);
  for (int i = 0; i < 4; ++i) hdr[4 + i] = static_cast<unsigned char>((mlen >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(hdr), 8);
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  out.write(reinterpret_cast<const char*>(bundle.blob.data()),
            static_cast<std::streamsize>(bundle.blob.size()));
  if (!out) throw std::runtime_error("weights: write failed for " + path);
}

inline WeightBundle load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("weights: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kWeightMagic, 8) != 0) {
    throw std::runtime_error("weights: bad magic in " + path);
  }
  unsigned char hdr[8];
  in.read(reinterpret_cast<char*>(hdr), 8);
  if (!in) throw std::runtime_error("weights: truncated header in " + path);
  std::uint32_t stored_crc = 0, mlen = 0;
  for (int i = 0; i < 4; ++i) stored_crc |= static_cast<std::uint32_t>(hdr[i]) << (8 * i);
  for (int i = 0; i < 4; ++i) mlen |= static_cast<std::uint32_t>(hdr[4 + i]) << (8 * i);

  std::string manifest(mlen, '\0');
  in.read(manifest.data(), mlen);
  if (!in) throw std::runtime_error("weights: truncated manifest in " + path);
  std::vector<std::uint8_t> blob{std::istreambuf_iterator<char>(in),
                                 std::istreambuf_iterator<char>()};

  const std::uint32_t actual_crc = crc32(blob.data(), blob.size());
  if (actual_crc != stored_crc) {
    throw std::runtime_error("weights: checksum mismatch in " + path);
  }

  WeightBundle bundle;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(manifest);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("weights: manifest parse error: " + std::string(e.what()));
  }
  bundle.arch = j.value("arch", std::string{});
  for (const auto& e : j.at("tensors")) {
    TensorEntry t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<std::int64_t>>();
    t.dtype = dtype_from_string(e.at("dtype").get<std::string>());
    t.scale = e.value("scale", 1.0);
    t.offset = e.at("offset").get<std::uint64_t>();
    bundle.manifest.push_back(std::move(t));
  }
  bundle.blob = std::move(blob);
  bundle.validate_layout();
  validate_contract(bundle);
  return bundle;
}

}  // namespace sdar
