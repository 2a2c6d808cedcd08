#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wsvc/errors.hpp"

namespace wsvc {

// Symmetric uniform quantization settings. Scales are per layer block,
// max-abs / (2^(bits-1) - 1); an all-zero block stores the 0.0 sentinel.
struct QuantSpec {
  int anchor_bits = 8;
  int delta_bits = 8;

  void validate() const {
    if (anchor_bits < 2 || anchor_bits > 16 || delta_bits < 2 ||
        delta_bits > 16)
      throw ConfigError("quant: bits must lie in [2,16]");
  }
};

struct QuantizedBlock {
  float scale = 0.f;  // 0 means the sentinel: all codes are zero
  std::vector<int32_t> codes;
};

// Round-half-away-from-zero symmetric quantizer. Codes lie in
// [-(2^(bits-1)-1), +(2^(bits-1)-1)]; dequantize(quantize(x)) is within
// scale/2 of x elementwise.
QuantizedBlock quantize_block(std::span<const float> values, int bits);
void dequantize_block(const QuantizedBlock& q, std::span<float> out);

inline int32_t quant_max_code(int bits) { return (1 << (bits - 1)) - 1; }

}  // namespace wsvc
