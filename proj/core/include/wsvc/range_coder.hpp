#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "wsvc/errors.hpp"

namespace wsvc {

// Byte-oriented range coder with carry handling via a cached byte and a
// 64-bit low register. Encoder and decoder renormalize at 2^24, so any
// model total below that is safe; keep totals <= ~2^17 for tight coding.
class RangeEncoder {
 public:
  explicit RangeEncoder(std::vector<uint8_t>& out) : out_(out) {}

  void encode(uint32_t cum, uint32_t freq, uint32_t total) {
    range_ /= total;
    low_ += static_cast<uint64_t>(cum) * range_;
    range_ *= freq;
    while (range_ < kTop) {
      shift_low();
      range_ <<= 8;
    }
  }

  // Must be called exactly once; writes the 5 tail bytes.
  void flush() {
    for (int i = 0; i < 5; ++i) shift_low();
  }

 private:
  static constexpr uint32_t kTop = 1u << 24;

  void shift_low() {
    if (static_cast<uint32_t>(low_ >> 32) != 0 ||
        static_cast<uint32_t>(low_) < 0xFF000000u) {
      if (started_) out_.push_back(static_cast<uint8_t>(cache_ + (low_ >> 32)));
      for (; pending_; --pending_)
        out_.push_back(static_cast<uint8_t>(0xFF + (low_ >> 32)));
      cache_ = static_cast<uint8_t>(low_ >> 24);
      started_ = true;
    } else {
      ++pending_;
    }
    low_ = (low_ << 8) & 0xFFFFFFFFull;
  }

  std::vector<uint8_t>& out_;
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t pending_ = 0;
  bool started_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> in) : in_(in) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  uint32_t decode_freq(uint32_t total) {
    range_ /= total;
    const uint32_t f = code_ / range_;
    return f >= total ? total - 1 : f;
  }

  void decode_update(uint32_t cum, uint32_t freq) {
    code_ -= cum * range_;
    range_ *= freq;
    while (range_ < kTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
  }

  size_t consumed() const { return pos_; }

 private:
  static constexpr uint32_t kTop = 1u << 24;

  uint8_t next_byte() {
    if (pos_ >= in_.size())
      throw DecodeError("range decoder: input exhausted mid-stream");
    return in_[pos_++];
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// Adaptive order-0 frequency table over a fixed alphabet, cumulative sums
// kept in a Fenwick tree. Symbol counts start at 1, grow by kIncrement per
// occurrence, and are halved (floor, min 1) when the total passes the limit.
// Encoder and decoder evolve identical state.
class AdaptiveModel {
 public:
  explicit AdaptiveModel(uint32_t alphabet);

  uint32_t alphabet() const { return static_cast<uint32_t>(count_.size()); }
  uint32_t total() const { return total_; }
  uint32_t freq(uint32_t symbol) const { return count_[symbol]; }
  uint32_t cum(uint32_t symbol) const;  // sum of counts below symbol
  // Largest symbol whose cum() <= f; also reports that cum.
  uint32_t find(uint32_t f, uint32_t& cum_out) const;
  void update(uint32_t symbol);

  // Ideal adaptive code length of the symbol under the current state, in
  // bits. Replaying a stream through update() reproduces the model's
  // Shannon bound.
  double bits(uint32_t symbol) const {
    return std::log2(static_cast<double>(total_) /
                     static_cast<double>(count_[symbol]));
  }

  static constexpr uint32_t kIncrement = 32;

 private:
  void rebuild();

  std::vector<uint32_t> count_;
  std::vector<uint32_t> tree_;  // Fenwick, 1-based
  uint32_t total_ = 0;
  uint32_t limit_ = 0;
};

void encode_symbol(RangeEncoder& rc, AdaptiveModel& m, uint32_t symbol);
uint32_t decode_symbol(RangeDecoder& rc, AdaptiveModel& m);

// Whole-stream helpers for a declared alphabet. The coded form does not
// embed the count; pass the expected symbol count to decode.
std::vector<uint8_t> entropy_encode(std::span<const uint32_t> symbols,
                                    uint32_t alphabet);
std::vector<uint32_t> entropy_decode(std::span<const uint8_t> bytes,
                                     size_t count, uint32_t alphabet);

}  // namespace wsvc
