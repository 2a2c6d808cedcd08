#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "wsvc/errors.hpp"

namespace wsvc {

// Per-parameter stochastic gates: a stretched hard-concrete distribution
// with point masses at 0 and 1, giving a differentiable surrogate for the
// L0 count of the gated vector.
struct GateSet {
  std::vector<float> log_alpha;
  float beta = 2.f / 3.f;
  float gamma = -0.1f;
  float zeta = 1.1f;

  GateSet() = default;
  explicit GateSet(size_t n, float init_log_alpha = 2.f)
      : log_alpha(n, init_log_alpha) {
    check_constants();
  }

  void check_constants() const {
    if (!(gamma < 0.f) || !(zeta > 1.f) || !(beta > 0.f))
      throw ContractError("gates: need gamma < 0 < 1 < zeta and beta > 0");
  }

  size_t size() const { return log_alpha.size(); }

  // Shift applied to log_alpha inside the open-probability sigmoid:
  // P(z != 0) = sigmoid(log_alpha - beta*log(-gamma/zeta)).
  double l0_shift() const {
    return static_cast<double>(beta) *
           std::log(-static_cast<double>(gamma) / static_cast<double>(zeta));
  }
};

// Stretched sigmoid of the logistic reparameterization:
// s = sigmoid((logit(u) + log_alpha)/beta), z = clamp(s*(zeta-gamma)+gamma).
// u must lie strictly inside (0,1).
void sample_gates(const GateSet& gates, std::span<const double> u,
                  std::span<float> z_out);

// Test-time estimator: z_hat = clamp(sigmoid(log_alpha)*(zeta-gamma)+gamma).
// Parameters whose z_hat is 0 are not transmitted.
void deterministic_gate(const GateSet& gates, std::span<float> z_out);
std::vector<float> deterministic_gate(const GateSet& gates);

// Differentiable expected L0: sum_j sigmoid(log_alpha_j - beta*log(-gamma/zeta)).
double expected_l0(const GateSet& gates);

// Per-gate open probability, the j-th term of expected_l0.
double gate_open_probability(const GateSet& gates, size_t j);

}  // namespace wsvc
