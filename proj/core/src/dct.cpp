#include "wsvc/dct.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace wsvc {

namespace {
std::mutex g_table_mutex;
std::map<int, std::vector<double>> g_tables;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

const std::vector<double>& dct_matrix(int n) {
  if (n < 1) throw ContractError("dct_matrix: length must be >= 1");
  std::lock_guard<std::mutex> lock(g_table_mutex);
  auto it = g_tables.find(n);
  if (it != g_tables.end()) return it->second;
  std::vector<double> m(static_cast<size_t>(n) * n);
  const double s0 = std::sqrt(1.0 / n);
  const double sk = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    const double s = k == 0 ? s0 : sk;
    for (int t = 0; t < n; ++t)
      m[static_cast<size_t>(k) * n + t] =
          s * std::cos(kPi * (2.0 * t + 1.0) * k / (2.0 * n));
  }
  return g_tables.emplace(n, std::move(m)).first->second;
}

void dct2(std::span<const double> in, std::span<double> out) {
  const int n = static_cast<int>(in.size());
  const std::vector<double>& m = dct_matrix(n);
  for (int k = 0; k < n; ++k) {
    double acc = 0;
    const double* row = m.data() + static_cast<size_t>(k) * n;
    for (int t = 0; t < n; ++t) acc += row[t] * in[t];
    out[k] = acc;
  }
}

void dct3(std::span<const double> in, std::span<double> out) {
  const int n = static_cast<int>(in.size());
  const std::vector<double>& m = dct_matrix(n);
  for (int t = 0; t < n; ++t) out[t] = 0;
  for (int k = 0; k < n; ++k) {
    const double ck = in[k];
    if (ck == 0.0) continue;
    const double* row = m.data() + static_cast<size_t>(k) * n;
    for (int t = 0; t < n; ++t) out[t] += ck * row[t];
  }
}

uint64_t DctLayout::hash() const {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(total);
  for (const DctSeq& s : seqs) {
    mix(s.start);
    mix(s.stride);
    mix(s.count);
  }
  return h;
}

void DctLayout::validate() const {
  std::vector<uint8_t> seen(total, 0);
  for (const DctSeq& s : seqs)
    for (uint32_t i = 0; i < s.count; ++i) {
      const size_t idx = s.start + static_cast<size_t>(i) * s.stride;
      if (idx >= total || seen[idx])
        throw ContractError("dct layout: sequences do not tile the array");
      seen[idx] = 1;
    }
  for (size_t i = 0; i < total; ++i)
    if (!seen[i])
      throw ContractError("dct layout: index " + std::to_string(i) +
                          " not covered");
}

DctLayout build_dct_layout(const ParamLayout& params) {
  DctLayout out;
  out.total = params.total;
  for (const BlockDesc& b : params.blocks) {
    const uint32_t off = static_cast<uint32_t>(b.offset);
    switch (b.kind) {
      case BlockKind::dense_weight: {
        // Block shape [in, out], row-major. The weights of output neuron j
        // are the strided column (j, j+out, ...), one sequence per neuron.
        const uint32_t in = static_cast<uint32_t>(b.shape[0]);
        const uint32_t outn = static_cast<uint32_t>(b.shape[1]);
        for (uint32_t j = 0; j < outn; ++j)
          out.seqs.push_back({off + j, outn, in});
        break;
      }
      case BlockKind::conv_weight: {
        // Block shape [cout, cin, kh, kw]. Aligned kernel elements across
        // output channels form one sequence per (ci, ky, kx).
        const uint32_t cout = static_cast<uint32_t>(b.shape[0]);
        const uint32_t inner = static_cast<uint32_t>(b.shape[1]) *
                               static_cast<uint32_t>(b.shape[2]) *
                               static_cast<uint32_t>(b.shape[3]);
        for (uint32_t j = 0; j < inner; ++j)
          out.seqs.push_back({off + j, inner, cout});
        break;
      }
      case BlockKind::bias:
        out.seqs.push_back({off, 1, static_cast<uint32_t>(b.size)});
        break;
    }
  }
  return out;
}

}  // namespace wsvc
