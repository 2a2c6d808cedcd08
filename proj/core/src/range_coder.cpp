#include "wsvc/range_coder.hpp"

#include <bit>

namespace wsvc {

AdaptiveModel::AdaptiveModel(uint32_t alphabet) {
  if (alphabet < 1 || alphabet > (1u << 22))
    throw ContractError("adaptive model: alphabet size out of range");
  count_.assign(alphabet, 1);
  limit_ = std::max<uint32_t>(1u << 16, 2 * alphabet);
  rebuild();
}

void AdaptiveModel::rebuild() {
  const size_t n = count_.size();
  tree_.assign(n + 1, 0);
  total_ = 0;
  for (size_t i = 0; i < n; ++i) {
    total_ += count_[i];
    tree_[i + 1] += count_[i];
    const size_t parent = (i + 1) + ((i + 1) & (~i));
    if (parent <= n) tree_[parent] += tree_[i + 1];
  }
}

uint32_t AdaptiveModel::cum(uint32_t symbol) const {
  uint32_t s = 0;
  for (uint32_t i = symbol; i > 0; i -= i & (~i + 1)) s += tree_[i];
  return s;
}

uint32_t AdaptiveModel::find(uint32_t f, uint32_t& cum_out) const {
  const uint32_t n = static_cast<uint32_t>(count_.size());
  uint32_t pos = 0;
  uint32_t rest = f;
  uint32_t mask = std::bit_floor(n);
  while (mask) {
    const uint32_t next = pos + mask;
    if (next <= n && tree_[next] <= rest) {
      rest -= tree_[next];
      pos = next;
    }
    mask >>= 1;
  }
  // pos = number of symbols whose cumulative total is <= f
  if (pos >= n) pos = n - 1;
  cum_out = f - rest;
  return pos;
}

void AdaptiveModel::update(uint32_t symbol) {
  if (symbol >= count_.size())
    throw ContractError("adaptive model: symbol outside declared alphabet");
  count_[symbol] += kIncrement;
  total_ += kIncrement;
  const uint32_t n = static_cast<uint32_t>(count_.size());
  for (uint32_t i = symbol + 1; i <= n; i += i & (~i + 1))
    tree_[i] += kIncrement;
  if (total_ > limit_) {
    for (uint32_t& c : count_) c = (c + 1) >> 1;
    rebuild();
  }
}

void encode_symbol(RangeEncoder& rc, AdaptiveModel& m, uint32_t symbol) {
  if (symbol >= m.alphabet())
    throw ContractError("encode_symbol: symbol outside declared alphabet");
  rc.encode(m.cum(symbol), m.freq(symbol), m.total());
  m.update(symbol);
}

uint32_t decode_symbol(RangeDecoder& rc, AdaptiveModel& m) {
  const uint32_t f = rc.decode_freq(m.total());
  uint32_t cum = 0;
  const uint32_t s = m.find(f, cum);
  rc.decode_update(cum, m.freq(s));
  m.update(s);
  return s;
}

std::vector<uint8_t> entropy_encode(std::span<const uint32_t> symbols,
                                    uint32_t alphabet) {
  std::vector<uint8_t> out;
  AdaptiveModel model(alphabet);
  RangeEncoder rc(out);
  for (uint32_t s : symbols) encode_symbol(rc, model, s);
  rc.flush();
  return out;
}

std::vector<uint32_t> entropy_decode(std::span<const uint8_t> bytes,
                                     size_t count, uint32_t alphabet) {
  std::vector<uint32_t> out(count);
  AdaptiveModel model(alphabet);
  RangeDecoder rc(bytes);
  for (size_t i = 0; i < count; ++i) out[i] = decode_symbol(rc, model);
  return out;
}

}  // namespace wsvc
