#include "wsvc/delta.hpp"

namespace wsvc {

std::vector<float> gated_values(const DeltaParams& delta,
                                std::span<const float> gate_values) {
  if (gate_values.size() != delta.free.size())
    throw ContractError("gated_values: one gate per delta entry required");
  std::vector<float> out(delta.free.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const float z = gate_values[i];
    if (z < 0.f || z > 1.f)
      throw ContractError("gated_values: gate values must lie in [0,1]");
    out[i] = z * delta.free[i];
  }
  return out;
}

std::vector<float> to_param_delta(std::span<const float> domain_values,
                                  DeltaDomain domain, const DctLayout& layout) {
  if (domain == DeltaDomain::direct)
    return {domain_values.begin(), domain_values.end()};
  if (domain_values.size() != layout.total)
    throw ContractError("to_param_delta: dct layout does not tile the delta");
  std::vector<float> out(domain_values.size());
  dct_layout_inverse<float>(domain_values, out, layout);
  return out;
}

std::vector<float> effective_delta(const DeltaParams& delta,
                                   std::span<const float> gate_values,
                                   const DctLayout& layout) {
  return to_param_delta(gated_values(delta, gate_values), delta.domain,
                        layout);
}

ParamVector apply_delta(const ParamVector& theta,
                        std::span<const float> param_step) {
  theta.check_layout();
  if (param_step.size() != theta.size())
    throw ContractError("apply_delta: step layout does not match parameters");
  ParamVector next;
  next.layout = theta.layout;
  next.data.resize(theta.size());
  for (size_t i = 0; i < theta.size(); ++i)
    next.data[i] = theta.data[i] + param_step[i];
  return next;
}

}  // namespace wsvc
