#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wsvc/param_vector.hpp"

namespace wsvc {

enum class Paradigm : uint8_t { coordinate, conv };
enum class Activation : uint8_t { siren, fourier_relu };
enum class TemporalMode : uint8_t { anchor_only, full_sequence };

// Channel count of the fixed noise input to the conv generator.
constexpr int kNoiseChannels = 32;

// Architecture description. Everything a decoder needs to rebuild the
// network topology and its fixed inputs lives here; trainable values do not.
struct ModelSpec {
  Paradigm paradigm = Paradigm::coordinate;
  // Widths per hidden layer (coordinate) or channels per stage (conv).
  std::vector<int> hidden_layers{64, 64};
  TemporalMode temporal_mode = TemporalMode::anchor_only;

  // Coordinate-based settings.
  Activation activation = Activation::siren;
  float omega0 = 30.f;
  int fourier_m = 256;
  float fourier_sigma = 10.f;
  uint64_t fourier_seed = 1;

  // Conv generator settings.
  bool skip_connections = false;
  uint64_t noise_seed = 1;

  void validate() const;

  // Canonical key=value text form, one field per line, fixed order. Embedded
  // verbatim in the bitstream header; equal specs produce equal text.
  std::string to_text() const;
  static ModelSpec from_text(const std::string& text);

  // Coordinate input dimensionality before any encoding (2 or 3).
  int coord_dim() const {
    return temporal_mode == TemporalMode::full_sequence ? 3 : 2;
  }
};

// Block table derived from the spec alone. Two builds agree exactly.
std::shared_ptr<const ParamLayout> build_layout(const ModelSpec& spec);

size_t param_count(const ModelSpec& spec);

// Deterministic initialization. SIREN weights follow the matched scheme:
// first layer U[-1/d, 1/d], later layers U[-sqrt(6/fan_in)/omega0, +...];
// relu paths use U[+-sqrt(6/fan_in)]; biases U[+-1/sqrt(fan_in)].
ParamVector init_params(const ModelSpec& spec, uint64_t seed);

}  // namespace wsvc
