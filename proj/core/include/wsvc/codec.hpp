#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wsvc/delta.hpp"
#include "wsvc/frame.hpp"
#include "wsvc/model_spec.hpp"
#include "wsvc/param_vector.hpp"
#include "wsvc/quant.hpp"

namespace wsvc {

// Quantized sparse weight step: only nonzero coded values are kept, as
// (flat index, code) pairs with strictly increasing indices, plus the
// per-block quantization scales.
struct SparseDeltaRecord {
  DeltaDomain domain = DeltaDomain::direct;
  uint64_t layout_hash = 0;
  std::vector<uint32_t> indices;
  std::vector<int32_t> codes;
  std::vector<float> scales;  // one per layer block
};

SparseDeltaRecord quantize_delta(std::span<const float> domain_values,
                                 const ParamLayout& params, DeltaDomain domain,
                                 uint64_t layout_hash, int bits);

// Dense domain-value vector with exact zeros at untransmitted positions.
std::vector<float> reconstruct_delta(const SparseDeltaRecord& rec,
                                     const ParamLayout& params);

// Everything the encoder hands to the container writer for one slice: the
// anchor parameters and the gated domain-value vector per subsequent frame
// (empty for full-sequence models).
struct SliceEncoding {
  int n_frames = 0;
  ParamVector theta0;
  std::vector<std::vector<float>> delta_domain_values;
};

struct SequenceEncoding {
  ModelSpec spec;
  int width = 0;
  int height = 0;
  DeltaDomain domain = DeltaDomain::direct;
  uint32_t slice_length = 0;  // 0 = single slice
  std::vector<SliceEncoding> slices;

  int total_frames() const {
    int n = 0;
    for (const SliceEncoding& s : slices) n += s.n_frames;
    return n;
  }
};

// Serialized container layout (little-endian):
//   magic "WSVC", u16 version=1,
//   length-prefixed canonical ModelSpec text,
//   u8 anchor_bits, u8 delta_bits, u8 delta domain,
//   u32 width, u32 height, u32 frame count, u32 slice length,
//   per slice: length-prefixed anchor section, then one length-prefixed
//   delta section per following frame,
//   u32 CRC-32 over all prior bytes.
std::vector<uint8_t> encode_video(const SequenceEncoding& seq,
                                  const QuantSpec& quant);

struct DecodedVideo {
  ModelSpec spec;
  QuantSpec quant;
  DeltaDomain domain = DeltaDomain::direct;
  int width = 0;
  int height = 0;
  std::vector<FrameBuffer> frames;
};

// Rebuilds every frame from the stream alone. The quantized parameter chain
// theta_t+1 = theta_t + dequant(delta_t) is the reference the encoder must
// mirror when reporting quality.
DecodedVideo decode_video(std::span<const uint8_t> stream);

struct StreamInfo {
  uint16_t version = 0;
  ModelSpec spec;
  QuantSpec quant;
  DeltaDomain domain = DeltaDomain::direct;
  int width = 0;
  int height = 0;
  int frame_count = 0;
  uint32_t slice_length = 0;
  std::vector<int> slice_frames;
  std::vector<size_t> anchor_section_bytes;  // per slice
  std::vector<size_t> delta_section_bytes;   // per delta, slice-major
  size_t total_bytes = 0;
};

StreamInfo inspect_stream(std::span<const uint8_t> stream);

struct RateInfo {
  uint64_t total_bits = 0;
  double bpp = 0;
};

// bpp counts every byte of the stream, headers included.
RateInfo measure_rate(size_t stream_bytes, int width, int height,
                      int n_frames);

// Frames per slice implied by (slice_length, total): chunks of slice_length
// in order, last one shorter; slice_length 0 means one slice.
std::vector<int> derive_slice_frames(uint32_t slice_length, int total_frames);

}  // namespace wsvc
