#pragma once

#include <span>
#include <vector>

#include "wsvc/dct.hpp"
#include "wsvc/gates.hpp"
#include "wsvc/param_vector.hpp"

namespace wsvc {

enum class DeltaDomain : uint8_t { direct, dct };

// Unconstrained parameter-step values, laid out like the model's flat
// ParamVector. In dct mode the entries are transform coefficients; the
// parameter-space step is the layout-wise inverse transform.
struct DeltaParams {
  std::vector<float> free;
  DeltaDomain domain = DeltaDomain::direct;
};

// Gated values in the sparsified domain: z (.) free. This is the vector the
// codec transmits; with deterministic gates folded in, the zero entries are
// exact zeros and the decoder needs no gate machinery.
std::vector<float> gated_values(const DeltaParams& delta,
                                std::span<const float> gate_values);

// Maps domain values to a parameter-space step (inverse DCT per layout
// sequence in dct mode, identity otherwise).
std::vector<float> to_param_delta(std::span<const float> domain_values,
                                  DeltaDomain domain, const DctLayout& layout);

// Parameter-space step of a gated delta: direct -> z (.) free,
// dct -> inverse_dct(z (.) free).
std::vector<float> effective_delta(const DeltaParams& delta,
                                   std::span<const float> gate_values,
                                   const DctLayout& layout);

// theta_next = theta + step, elementwise; inputs untouched.
ParamVector apply_delta(const ParamVector& theta,
                        std::span<const float> param_step);

}  // namespace wsvc
