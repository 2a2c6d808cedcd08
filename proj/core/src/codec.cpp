#include "wsvc/codec.hpp"

#include <cstring>

#include "wsvc/bitstream.hpp"
#include "wsvc/model_eval.hpp"
#include "wsvc/range_coder.hpp"

namespace wsvc {

namespace {

constexpr char kMagic[4] = {'W', 'S', 'V', 'C'};
constexpr uint16_t kVersion = 1;

uint32_t value_alphabet(int bits) {
  return 2u * static_cast<uint32_t>(quant_max_code(bits)) + 1;
}

std::vector<uint8_t> encode_anchor_section(const ParamVector& theta,
                                           int anchor_bits) {
  theta.check_layout();
  ByteWriter w;
  std::vector<QuantizedBlock> blocks;
  blocks.reserve(theta.layout->blocks.size());
  for (const BlockDesc& b : theta.layout->blocks) {
    blocks.push_back(quantize_block(
        std::span<const float>(theta.data.data() + b.offset, b.size),
        anchor_bits));
    w.f32(blocks.back().scale);
  }
  const int32_t m = quant_max_code(anchor_bits);
  AdaptiveModel model(value_alphabet(anchor_bits));
  std::vector<uint8_t> rc_bytes;
  RangeEncoder rc(rc_bytes);
  for (const QuantizedBlock& qb : blocks)
    for (int32_t c : qb.codes)
      encode_symbol(rc, model, static_cast<uint32_t>(c + m));
  rc.flush();
  w.raw(rc_bytes);
  return std::move(w.bytes());
}

ParamVector decode_anchor_section(std::span<const uint8_t> payload,
                                  std::shared_ptr<const ParamLayout> layout,
                                  int anchor_bits) {
  ByteReader r(payload);
  std::vector<float> scales;
  scales.reserve(layout->blocks.size());
  for (size_t i = 0; i < layout->blocks.size(); ++i) scales.push_back(r.f32());
  const int32_t m = quant_max_code(anchor_bits);
  AdaptiveModel model(value_alphabet(anchor_bits));
  RangeDecoder rc(payload.subspan(r.pos()));
  ParamVector theta;
  theta.layout = layout;
  theta.data.resize(layout->total);
  for (size_t bi = 0; bi < layout->blocks.size(); ++bi) {
    const BlockDesc& b = layout->blocks[bi];
    for (size_t i = 0; i < b.size; ++i) {
      const int32_t code = static_cast<int32_t>(decode_symbol(rc, model)) - m;
      theta.data[b.offset + i] = static_cast<float>(code) * scales[bi];
    }
  }
  return theta;
}

std::vector<uint8_t> encode_delta_section(const SparseDeltaRecord& rec,
                                          int delta_bits) {
  ByteWriter w;
  w.u64(rec.layout_hash);
  w.u32(static_cast<uint32_t>(rec.indices.size()));
  for (float s : rec.scales) w.f32(s);
  // Index gaps as varint bytes, then values; one range-coder stream, two
  // independent adaptive models.
  std::vector<uint8_t> gap_bytes;
  uint32_t prev = 0;
  for (size_t i = 0; i < rec.indices.size(); ++i) {
    put_varint(gap_bytes, i == 0 ? rec.indices[0] : rec.indices[i] - prev);
    prev = rec.indices[i];
  }
  std::vector<uint8_t> rc_bytes;
  RangeEncoder rc(rc_bytes);
  AdaptiveModel gap_model(256);
  for (uint8_t b : gap_bytes) encode_symbol(rc, gap_model, b);
  const int32_t m = quant_max_code(delta_bits);
  AdaptiveModel value_model(value_alphabet(delta_bits));
  for (int32_t c : rec.codes)
    encode_symbol(rc, value_model, static_cast<uint32_t>(c + m));
  rc.flush();
  w.raw(rc_bytes);
  return std::move(w.bytes());
}

SparseDeltaRecord decode_delta_section(std::span<const uint8_t> payload,
                                       const ParamLayout& params,
                                       DeltaDomain domain, int delta_bits) {
  ByteReader r(payload);
  SparseDeltaRecord rec;
  rec.domain = domain;
  rec.layout_hash = r.u64();
  const uint32_t nnz = r.u32();
  rec.scales.resize(params.blocks.size());
  for (float& s : rec.scales) s = r.f32();
  RangeDecoder rc(payload.subspan(r.pos()));
  AdaptiveModel gap_model(256);
  rec.indices.resize(nnz);
  uint64_t prev = 0;
  for (uint32_t i = 0; i < nnz; ++i) {
    uint64_t gap = 0;
    int shift = 0;
    for (;;) {
      const uint8_t b = static_cast<uint8_t>(decode_symbol(rc, gap_model));
      gap |= static_cast<uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) break;
      shift += 7;
      if (shift > 63) throw DecodeError("delta section: runaway index varint");
    }
    prev = i == 0 ? gap : prev + gap;
    if (prev >= params.total)
      throw DecodeError("delta section: index beyond parameter count");
    rec.indices[i] = static_cast<uint32_t>(prev);
  }
  const int32_t m = quant_max_code(delta_bits);
  AdaptiveModel value_model(value_alphabet(delta_bits));
  rec.codes.resize(nnz);
  for (uint32_t i = 0; i < nnz; ++i)
    rec.codes[i] = static_cast<int32_t>(decode_symbol(rc, value_model)) - m;
  return rec;
}

// Renders frames of one slice given a parameter chain; caches the fixed
// model inputs across frames.
class SliceRenderer {
 public:
  SliceRenderer(const ModelSpec& spec, int width, int height, int n_frames)
      : spec_(spec), width_(width), height_(height), n_frames_(n_frames) {
    const bool seq = spec.temporal_mode == TemporalMode::full_sequence;
    if (spec.paradigm == Paradigm::coordinate) {
      grid_ = seq ? coordinate_grid(width, height, n_frames)
                  : coordinate_grid(width, height);
    } else {
      noise_ = make_noise(spec, width, height, seq ? n_frames : 1);
    }
  }

  FrameBuffer render(const ParamVector& theta, int t) const {
    const bool seq = spec_.temporal_mode == TemporalMode::full_sequence;
    if (spec_.paradigm == Paradigm::coordinate)
      return eval_coordinate_model(spec_, theta, grid_, seq ? t : 0);
    return eval_conv_model(spec_, theta, noise_, seq ? t : 0, width_, height_);
  }

 private:
  const ModelSpec& spec_;
  int width_, height_, n_frames_;
  CoordGrid grid_;
  NoiseInput noise_;
};

struct ParsedHeader {
  StreamInfo info;
  size_t sections_at = 0;  // byte offset of the first section
};

ParsedHeader parse_header(std::span<const uint8_t> stream) {
  if (stream.size() < 10) throw DecodeError("bitstream: too short");
  if (std::memcmp(stream.data(), kMagic, 4) != 0)
    throw DecodeError("bitstream: bad magic, not a wsvc stream");
  const uint32_t stored_crc = static_cast<uint32_t>(stream[stream.size() - 4]) |
                              (static_cast<uint32_t>(stream[stream.size() - 3]) << 8) |
                              (static_cast<uint32_t>(stream[stream.size() - 2]) << 16) |
                              (static_cast<uint32_t>(stream[stream.size() - 1]) << 24);
  if (crc32_of(stream.first(stream.size() - 4)) != stored_crc)
    throw DecodeError("bitstream: checksum failure");
  ByteReader r(stream.subspan(4, stream.size() - 8));
  ParsedHeader h;
  h.info.version = r.u16();
  if (h.info.version != kVersion)
    throw DecodeError("bitstream: unsupported version " +
                      std::to_string(h.info.version));
  h.info.spec = ModelSpec::from_text(r.str());
  h.info.quant.anchor_bits = r.u8();
  h.info.quant.delta_bits = r.u8();
  h.info.quant.validate();
  const uint8_t dom = r.u8();
  if (dom > 1) throw DecodeError("bitstream: unknown delta domain");
  h.info.domain = dom ? DeltaDomain::dct : DeltaDomain::direct;
  h.info.width = static_cast<int>(r.u32());
  h.info.height = static_cast<int>(r.u32());
  h.info.frame_count = static_cast<int>(r.u32());
  h.info.slice_length = r.u32();
  if (h.info.width < 1 || h.info.height < 1 || h.info.frame_count < 1)
    throw DecodeError("bitstream: bad dimensions");
  h.info.slice_frames =
      derive_slice_frames(h.info.slice_length, h.info.frame_count);
  h.info.total_bytes = stream.size();
  h.sections_at = 4 + r.pos();
  return h;
}

}  // namespace

std::vector<int> derive_slice_frames(uint32_t slice_length, int total_frames) {
  if (total_frames < 1)
    throw ContractError("slice framing: need at least one frame");
  std::vector<int> out;
  if (slice_length == 0) {
    out.push_back(total_frames);
    return out;
  }
  int left = total_frames;
  while (left > 0) {
    const int n = std::min<int>(left, static_cast<int>(slice_length));
    out.push_back(n);
    left -= n;
  }
  return out;
}

SparseDeltaRecord quantize_delta(std::span<const float> domain_values,
                                 const ParamLayout& params, DeltaDomain domain,
                                 uint64_t layout_hash, int bits) {
  if (domain_values.size() != params.total)
    throw ContractError("quantize_delta: values do not match layout");
  SparseDeltaRecord rec;
  rec.domain = domain;
  rec.layout_hash = layout_hash;
  rec.scales.reserve(params.blocks.size());
  for (const BlockDesc& b : params.blocks) {
    const QuantizedBlock qb = quantize_block(
        domain_values.subspan(b.offset, b.size), bits);
    rec.scales.push_back(qb.scale);
    for (size_t i = 0; i < qb.codes.size(); ++i)
      if (qb.codes[i] != 0) {
        rec.indices.push_back(static_cast<uint32_t>(b.offset + i));
        rec.codes.push_back(qb.codes[i]);
      }
  }
  return rec;
}

std::vector<float> reconstruct_delta(const SparseDeltaRecord& rec,
                                     const ParamLayout& params) {
  std::vector<float> out(params.total, 0.f);
  size_t bi = 0;
  for (size_t k = 0; k < rec.indices.size(); ++k) {
    const uint32_t idx = rec.indices[k];
    if (k > 0 && idx <= rec.indices[k - 1])
      throw DecodeError("delta record: indices not strictly increasing");
    if (idx >= params.total)
      throw DecodeError("delta record: index beyond parameter count");
    while (params.blocks[bi].offset + params.blocks[bi].size <= idx) ++bi;
    out[idx] = static_cast<float>(rec.codes[k]) * rec.scales[bi];
  }
  return out;
}

std::vector<uint8_t> encode_video(const SequenceEncoding& seq,
                                  const QuantSpec& quant) {
  quant.validate();
  seq.spec.validate();
  if (seq.slices.empty())
    throw ContractError("encode_video: no slices to encode");
  if (seq.width < 1 || seq.height < 1)
    throw ContractError("encode_video: bad dimensions");
  const std::vector<int> expect =
      derive_slice_frames(seq.slice_length, seq.total_frames());
  if (expect.size() != seq.slices.size())
    throw ContractError("encode_video: slice framing does not match content");
  const bool full_seq = seq.spec.temporal_mode == TemporalMode::full_sequence;
  auto layout = build_layout(seq.spec);
  const DctLayout dct = build_dct_layout(*layout);
  const uint64_t layout_hash =
      seq.domain == DeltaDomain::dct ? dct.hash() : layout->fingerprint();

  ByteWriter w;
  w.raw(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(kMagic), 4));
  w.u16(kVersion);
  w.str(seq.spec.to_text());
  w.u8(static_cast<uint8_t>(quant.anchor_bits));
  w.u8(static_cast<uint8_t>(quant.delta_bits));
  w.u8(seq.domain == DeltaDomain::dct ? 1 : 0);
  w.u32(static_cast<uint32_t>(seq.width));
  w.u32(static_cast<uint32_t>(seq.height));
  w.u32(static_cast<uint32_t>(seq.total_frames()));
  w.u32(seq.slice_length);

  for (size_t si = 0; si < seq.slices.size(); ++si) {
    const SliceEncoding& sl = seq.slices[si];
    if (sl.n_frames != expect[si])
      throw ContractError("encode_video: slice frame count mismatch");
    const size_t want_deltas = full_seq ? 0 : sl.n_frames - 1;
    if (sl.delta_domain_values.size() != want_deltas)
      throw ContractError("encode_video: wrong number of deltas in slice");
    std::vector<uint8_t> anchor =
        encode_anchor_section(sl.theta0, quant.anchor_bits);
    w.u32(static_cast<uint32_t>(anchor.size()));
    w.raw(anchor);
    for (const std::vector<float>& dv : sl.delta_domain_values) {
      SparseDeltaRecord rec = quantize_delta(dv, *layout, seq.domain,
                                             layout_hash, quant.delta_bits);
      std::vector<uint8_t> sec = encode_delta_section(rec, quant.delta_bits);
      w.u32(static_cast<uint32_t>(sec.size()));
      w.raw(sec);
    }
  }
  w.u32(crc32_of(w.bytes()));
  return std::move(w.bytes());
}

DecodedVideo decode_video(std::span<const uint8_t> stream) {
  const ParsedHeader h = parse_header(stream);
  const ModelSpec& spec = h.info.spec;
  auto layout = build_layout(spec);
  const DctLayout dct = build_dct_layout(*layout);
  const uint64_t expect_hash =
      h.info.domain == DeltaDomain::dct ? dct.hash() : layout->fingerprint();
  const bool full_seq = spec.temporal_mode == TemporalMode::full_sequence;

  DecodedVideo out;
  out.spec = spec;
  out.quant = h.info.quant;
  out.domain = h.info.domain;
  out.width = h.info.width;
  out.height = h.info.height;

  ByteReader r(stream.subspan(h.sections_at,
                              stream.size() - h.sections_at - 4));
  for (int slice_n : h.info.slice_frames) {
    SliceRenderer renderer(spec, h.info.width, h.info.height, slice_n);
    const uint32_t alen = r.u32();
    ParamVector theta = decode_anchor_section(r.raw(alen), layout,
                                              h.info.quant.anchor_bits);
    if (full_seq) {
      for (int t = 0; t < slice_n; ++t)
        out.frames.push_back(renderer.render(theta, t));
    } else {
      out.frames.push_back(renderer.render(theta, 0));
      for (int t = 1; t < slice_n; ++t) {
        const uint32_t dlen = r.u32();
        SparseDeltaRecord rec = decode_delta_section(
            r.raw(dlen), *layout, h.info.domain, h.info.quant.delta_bits);
        if (rec.layout_hash != expect_hash)
          throw DecodeError("bitstream: delta layout hash mismatch");
        std::vector<float> dv = reconstruct_delta(rec, *layout);
        std::vector<float> step = to_param_delta(dv, h.info.domain, dct);
        theta = apply_delta(theta, step);
        out.frames.push_back(renderer.render(theta, t));
      }
    }
  }
  if (r.remaining() != 0)
    throw DecodeError("bitstream: trailing bytes after last section");
  return out;
}

StreamInfo inspect_stream(std::span<const uint8_t> stream) {
  ParsedHeader h = parse_header(stream);
  const bool full_seq =
      h.info.spec.temporal_mode == TemporalMode::full_sequence;
  ByteReader r(stream.subspan(h.sections_at,
                              stream.size() - h.sections_at - 4));
  for (int slice_n : h.info.slice_frames) {
    const uint32_t alen = r.u32();
    r.raw(alen);
    h.info.anchor_section_bytes.push_back(alen);
    if (!full_seq)
      for (int t = 1; t < slice_n; ++t) {
        const uint32_t dlen = r.u32();
        r.raw(dlen);
        h.info.delta_section_bytes.push_back(dlen);
      }
  }
  return h.info;
}

RateInfo measure_rate(size_t stream_bytes, int width, int height,
                      int n_frames) {
  RateInfo r;
  r.total_bits = static_cast<uint64_t>(stream_bytes) * 8;
  r.bpp = static_cast<double>(r.total_bits) /
          (static_cast<double>(width) * height * n_frames);
  return r;
}

}  // namespace wsvc
