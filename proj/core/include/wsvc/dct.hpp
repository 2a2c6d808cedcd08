#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wsvc/errors.hpp"
#include "wsvc/param_vector.hpp"

namespace wsvc {

// One strided 1-D sequence inside a flat value array: elements
// start, start+stride, ..., start+(count-1)*stride.
struct DctSeq {
  uint32_t start = 0;
  uint32_t stride = 1;
  uint32_t count = 0;
};

// Partition of a flat array into transform sequences. Dense weight blocks
// contribute one sequence per output neuron; conv weight blocks one sequence
// per (input channel, kernel position) running across output channels; bias
// blocks are a single sequence each. Sequences tile the array exactly.
struct DctLayout {
  std::vector<DctSeq> seqs;
  size_t total = 0;

  uint64_t hash() const;
  // Throws if the sequences do not tile [0, total) exactly once.
  void validate() const;
};

DctLayout build_dct_layout(const ParamLayout& params);

// Orthonormal DCT-II matrix for length n, row-major n*n:
// C[k][t] = s_k * cos(pi*(2t+1)*k/(2n)), s_0 = sqrt(1/n), s_k = sqrt(2/n).
// Cached per length; thread safe.
const std::vector<double>& dct_matrix(int n);

// Single-sequence transforms (contiguous, 64-bit). The inverse is DCT-III,
// i.e. the transpose of the orthonormal DCT-II matrix.
void dct2(std::span<const double> in, std::span<double> out);
void dct3(std::span<const double> in, std::span<double> out);

// Whole-layout transforms over a flat array. Values are gathered per
// sequence, transformed, and scattered back to the same positions, so
// coefficient k of a sequence lives where element k did. Accumulation is in
// double regardless of T.
template <typename T>
void dct_layout_forward(std::span<const T> in, std::span<T> out,
                        const DctLayout& layout) {
  if (in.size() != layout.total || out.size() != layout.total)
    throw ShapeError("dct_forward: layout tiles " +
                     std::to_string(layout.total) + " values, got " +
                     std::to_string(in.size()));
  std::vector<double> buf, coef;
  for (const DctSeq& s : layout.seqs) {
    buf.resize(s.count);
    coef.resize(s.count);
    for (uint32_t i = 0; i < s.count; ++i)
      buf[i] = static_cast<double>(in[s.start + static_cast<size_t>(i) * s.stride]);
    dct2(buf, coef);
    for (uint32_t i = 0; i < s.count; ++i)
      out[s.start + static_cast<size_t>(i) * s.stride] = static_cast<T>(coef[i]);
  }
}

template <typename T>
void dct_layout_inverse(std::span<const T> in, std::span<T> out,
                        const DctLayout& layout) {
  if (in.size() != layout.total || out.size() != layout.total)
    throw ShapeError("dct_inverse: layout tiles " +
                     std::to_string(layout.total) + " values, got " +
                     std::to_string(in.size()));
  std::vector<double> buf, vals;
  for (const DctSeq& s : layout.seqs) {
    buf.resize(s.count);
    vals.resize(s.count);
    for (uint32_t i = 0; i < s.count; ++i)
      buf[i] = static_cast<double>(in[s.start + static_cast<size_t>(i) * s.stride]);
    dct3(buf, vals);
    for (uint32_t i = 0; i < s.count; ++i)
      out[s.start + static_cast<size_t>(i) * s.stride] = static_cast<T>(vals[i]);
  }
}

}  // namespace wsvc
