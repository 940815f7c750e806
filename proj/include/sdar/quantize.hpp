#pragma once

// Post-training INT8 quantization: per-tensor symmetric, scale = max|w|/127,
// round half away from zero. An all-zero tensor gets scale 1 by convention.
// Dequantized inference reuses the normal from_bundle path, which widens
// int8 entries back to double via their scale.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sdar/weights.hpp"

namespace sdar {

inline WeightBundle quantize_int8(const WeightBundle& src) {
  WeightBundle out;
  out.arch = src.arch;
  for (const auto& entry : src.manifest) {
    if (entry.dtype != DType::kF32) {
      throw std::invalid_argument("quantize_int8: tensor " + entry.name + " is not float32");
    }
    const std::vector<double> values = src.tensor(entry.name);
    double max_abs = 0.0;
    for (double v : values) max_abs = std::max(max_abs, std::abs(v));
    const double scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
    std::vector<std::int8_t> q(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double r = std::round(values[i] / scale);  // half away from zero
      q[i] = static_cast<std::int8_t>(std::clamp(r, -127.0, 127.0));
    }
    out.append_i8(entry.name, entry.shape, q, scale);
  }
  return out;
}

// Widens an int8 bundle back to float32 storage (values stay quantized).
inline WeightBundle dequantize(const WeightBundle& src) {
  WeightBundle out;
  out.arch = src.arch;
  for (const auto& entry : src.manifest) {
    out.append_f32(entry.name, entry.shape, src.tensor(entry.name));
  }
  return out;
}

}  // namespace sdar
