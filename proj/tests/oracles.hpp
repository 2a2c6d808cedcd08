#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they check.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "wsvc/graph.hpp"
#include "wsvc/rng.hpp"

namespace oracles {

// Textbook DCT-II / DCT-III, orthonormal scaling, straight O(N^2) sums.
inline std::vector<double> naive_dct2(std::span<const double> x) {
  const size_t n = x.size();
  std::vector<double> out(n);
  const double pi = std::acos(-1.0);
  for (size_t k = 0; k < n; ++k) {
    double acc = 0;
    for (size_t t = 0; t < n; ++t)
      acc += x[t] * std::cos(pi * (2.0 * t + 1.0) * k / (2.0 * n));
    const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    out[k] = s * acc;
  }
  return out;
}

inline std::vector<double> naive_dct3(std::span<const double> c) {
  const size_t n = c.size();
  std::vector<double> out(n);
  const double pi = std::acos(-1.0);
  for (size_t t = 0; t < n; ++t) {
    double acc = 0;
    for (size_t k = 0; k < n; ++k) {
      const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      acc += s * c[k] * std::cos(pi * (2.0 * t + 1.0) * k / (2.0 * n));
    }
    out[t] = acc;
  }
  return out;
}

// Central-difference gradient check for a scalar function of several flat
// leaf vectors. `build` must construct the graph from the given leaf values
// and return the loss node; leaves are reported through `leaf_out`.
struct GradCheckResult {
  double max_rel_err = 0;
  size_t checked = 0;
};

using BuildFn = std::function<wsvc::Var(wsvc::Graph<double>&,
                                        const std::vector<std::vector<double>>&,
                                        std::vector<wsvc::Var>&)>;

inline double eval_loss(const BuildFn& build,
                        const std::vector<std::vector<double>>& values) {
  wsvc::Graph<double> g;
  std::vector<wsvc::Var> leaves;
  wsvc::Var loss = build(g, values, leaves);
  return g.value(loss)[0];
}

inline GradCheckResult gradcheck(const BuildFn& build,
                                 std::vector<std::vector<double>> values,
                                 double h = 1e-4) {
  wsvc::Graph<double> g;
  std::vector<wsvc::Var> leaves;
  wsvc::Var loss = build(g, values, leaves);
  g.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (wsvc::Var v : leaves) {
    std::span<const double> gr = g.grad(v);
    analytic.emplace_back(gr.begin(), gr.end());
  }
  GradCheckResult res;
  for (size_t li = 0; li < values.size(); ++li) {
    for (size_t i = 0; i < values[li].size(); ++i) {
      const double keep = values[li][i];
      values[li][i] = keep + h;
      const double fp = eval_loss(build, values);
      values[li][i] = keep - h;
      const double fm = eval_loss(build, values);
      values[li][i] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[li][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      res.max_rel_err = std::max(res.max_rel_err, std::fabs(a - numeric) / denom);
      ++res.checked;
    }
  }
  return res;
}

// Uniform values bounded away from zero, for ops with kinks at 0/1.
inline std::vector<double> random_vec(wsvc::Rng& rng, size_t n, double lo,
                                      double hi, double avoid_zero_margin = 0) {
  std::vector<double> v(n);
  for (double& x : v) {
    do {
      x = rng.uniform(lo, hi);
    } while (avoid_zero_margin > 0 && std::fabs(x) < avoid_zero_margin);
  }
  return v;
}

}  // namespace oracles
