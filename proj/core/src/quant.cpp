#include "wsvc/quant.hpp"

#include <cmath>

namespace wsvc {

QuantizedBlock quantize_block(std::span<const float> values, int bits) {
  if (bits < 2 || bits > 16) throw ContractError("quantize: bits not in [2,16]");
  QuantizedBlock q;
  q.codes.resize(values.size());
  float maxabs = 0.f;
  for (float v : values) {
    if (!std::isfinite(v)) throw NumericError("quantize: non-finite value");
    maxabs = std::max(maxabs, std::fabs(v));
  }
  if (maxabs == 0.f) return q;  // sentinel scale, all-zero codes
  const int32_t m = quant_max_code(bits);
  q.scale = maxabs / static_cast<float>(m);
  for (size_t i = 0; i < values.size(); ++i) {
    // std::round is round-half-away-from-zero.
    int32_t c = static_cast<int32_t>(
        std::round(static_cast<double>(values[i]) / q.scale));
    if (c > m) c = m;
    if (c < -m) c = -m;
    q.codes[i] = c;
  }
  return q;
}

void dequantize_block(const QuantizedBlock& q, std::span<float> out) {
  if (out.size() != q.codes.size())
    throw ContractError("dequantize: size mismatch");
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(q.codes[i]) * q.scale;
}

}  // namespace wsvc
