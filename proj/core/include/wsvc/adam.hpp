#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "wsvc/errors.hpp"

namespace wsvc {

// Adam with bias correction. Moments track one flat parameter vector.
struct AdamState {
  uint64_t step_count = 0;
  std::vector<float> first_moment;
  std::vector<float> second_moment;
  float learning_rate = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;

  explicit AdamState(size_t n, float lr = 1e-4f)
      : first_moment(n, 0.f), second_moment(n, 0.f), learning_rate(lr) {}
};

inline void adam_step(std::span<float> params, std::span<const float> grads,
                      AdamState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size())
    throw ContractError("adam_step: params/grads/moments size mismatch");
  state.step_count += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  const double lr = state.learning_rate, eps = state.epsilon;
  float* m = state.first_moment.data();
  float* v = state.second_moment.data();
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * g);
    v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * g * g);
    const double mh = m[i] / c1;
    const double vh = v[i] / c2;
    params[i] = static_cast<float>(params[i] - lr * mh / (std::sqrt(vh) + eps));
  }
}

}  // namespace wsvc
