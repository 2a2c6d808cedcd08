#include "wsvc/gates.hpp"

namespace wsvc {

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline float stretch_clamp(double s, double gamma, double zeta) {
  const double v = s * (zeta - gamma) + gamma;
  return static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
}
}  // namespace

void sample_gates(const GateSet& gates, std::span<const double> u,
                  std::span<float> z_out) {
  gates.check_constants();
  if (u.size() != gates.size() || z_out.size() != gates.size())
    throw ContractError("sample_gates: noise/output size mismatch");
  const double beta = gates.beta, gamma = gates.gamma, zeta = gates.zeta;
  for (size_t j = 0; j < u.size(); ++j) {
    if (!(u[j] > 0.0) || !(u[j] < 1.0))
      throw ContractError("sample_gates: noise must lie in the open (0,1)");
    const double logit_u = std::log(u[j]) - std::log1p(-u[j]);
    const double s =
        sigmoid((logit_u + static_cast<double>(gates.log_alpha[j])) / beta);
    z_out[j] = stretch_clamp(s, gamma, zeta);
  }
}

void deterministic_gate(const GateSet& gates, std::span<float> z_out) {
  gates.check_constants();
  if (z_out.size() != gates.size())
    throw ContractError("deterministic_gate: output size mismatch");
  const double gamma = gates.gamma, zeta = gates.zeta;
  for (size_t j = 0; j < gates.size(); ++j)
    z_out[j] =
        stretch_clamp(sigmoid(static_cast<double>(gates.log_alpha[j])), gamma, zeta);
}

std::vector<float> deterministic_gate(const GateSet& gates) {
  std::vector<float> z(gates.size());
  deterministic_gate(gates, z);
  return z;
}

double gate_open_probability(const GateSet& gates, size_t j) {
  return sigmoid(static_cast<double>(gates.log_alpha[j]) - gates.l0_shift());
}

double expected_l0(const GateSet& gates) {
  gates.check_constants();
  const double shift = gates.l0_shift();
  double acc = 0;
  for (float la : gates.log_alpha)
    acc += sigmoid(static_cast<double>(la) - shift);
  return acc;
}

}  // namespace wsvc
