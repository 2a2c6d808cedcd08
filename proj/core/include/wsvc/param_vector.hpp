#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "wsvc/errors.hpp"

namespace wsvc {

enum class BlockKind : uint8_t { dense_weight, conv_weight, bias };

// One layer block inside the flat parameter array.
struct BlockDesc {
  std::string name;
  BlockKind kind = BlockKind::bias;
  std::vector<int> shape;
  size_t offset = 0;
  size_t size = 0;
};

// Block table for a model's trainable parameters. Blocks tile the flat array
// exactly; the table is a pure function of the model spec.
struct ParamLayout {
  std::vector<BlockDesc> blocks;
  size_t total = 0;

  void validate() const {
    size_t expect = 0;
    for (const BlockDesc& b : blocks) {
      if (b.offset != expect)
        throw ContractError("param layout: block '" + b.name +
                            "' does not tile the flat array");
      size_t n = 1;
      for (int d : b.shape) n *= static_cast<size_t>(d);
      if (n != b.size)
        throw ContractError("param layout: block '" + b.name +
                            "' shape/size mismatch");
      expect += b.size;
    }
    if (expect != total)
      throw ContractError("param layout: blocks cover " +
                          std::to_string(expect) + " of " +
                          std::to_string(total) + " values");
  }

  uint64_t fingerprint() const {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    };
    mix(total);
    for (const BlockDesc& b : blocks) {
      mix(static_cast<uint64_t>(b.kind));
      mix(b.offset);
      mix(b.size);
      for (int d : b.shape) mix(static_cast<uint64_t>(d));
    }
    return h;
  }
};

// Flat view of all trainable parameters plus its block table.
struct ParamVector {
  std::shared_ptr<const ParamLayout> layout;
  std::vector<float> data;

  size_t size() const { return data.size(); }

  void check_layout() const {
    if (!layout || data.size() != layout->total)
      throw ContractError("param vector does not match its layout");
  }
};

}  // namespace wsvc
