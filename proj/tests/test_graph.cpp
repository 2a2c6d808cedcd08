#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "wsvc/adam.hpp"
#include "wsvc/graph.hpp"

using namespace wsvc;

TEST_SUITE_BEGIN("graph");

TEST_CASE("conv2d identity kernel passes input through") {
  Graph<float> g;
  std::vector<float> in(16, 1.f);
  Var x = g.constant({1, 1, 4, 4}, in);
  Var w = g.constant({1, 1, 1, 1}, std::vector<float>{1.f});
  Var y = g.conv2d(x, w);
  CHECK(g.shape(y) == Shape{1, 1, 4, 4});
  for (float v : g.value(y)) CHECK(v == 1.f);
}

TEST_CASE("conv2d all-ones 3x3 kernel counts the zero-padded neighborhood") {
  Graph<float> g;
  std::vector<float> in(16, 1.f);
  Var x = g.constant({1, 1, 4, 4}, in);
  Var w = g.constant({1, 1, 3, 3}, std::vector<float>(9, 1.f));
  Var y = g.conv2d(x, w);
  std::span<const float> v = g.value(y);
  // Hand convolution: corners see 4 taps, edges 6, interior 9.
  CHECK(v[0] == 4.f);
  CHECK(v[1] == 6.f);
  CHECK(v[5] == 9.f);
  CHECK(v[15] == 4.f);
}

TEST_CASE("conv2d keeps the spatial shape for any odd kernel") {
  Graph<float> g;
  Rng rng(7);
  std::vector<float> in(2 * 3 * 5 * 7);
  for (float& v : in) v = rng.uniform_f(-1, 1);
  std::vector<float> w(4 * 3 * 5 * 3);
  for (float& v : w) v = rng.uniform_f(-1, 1);
  Var y = g.conv2d(g.constant({2, 3, 5, 7}, in), g.constant({4, 3, 5, 3}, w));
  CHECK(g.shape(y) == Shape{2, 4, 5, 7});
}

TEST_CASE("sin of a zero tensor is zero") {
  Graph<float> g;
  Var y = g.sin(g.full({3, 2}, 0.f));
  for (float v : g.value(y)) CHECK(v == 0.f);
}

TEST_CASE("shape mismatches name the op and both shapes") {
  Graph<float> g;
  Var a = g.full({2, 3}, 1.f);
  Var b = g.full({3, 3}, 1.f);
  CHECK_THROWS_WITH_AS(g.add(a, b),
                       doctest::Contains("add: incompatible shapes [2,3]"),
                       ShapeError);
  CHECK_THROWS_AS(g.matmul(b, a), ShapeError);
  CHECK_THROWS_AS(g.conv2d(a, b), ShapeError);
}

TEST_CASE("non-finite op outputs raise a numeric fault") {
  Graph<float> g;
  Var a = g.full({4}, 1e30f);
  CHECK_THROWS_AS(g.mul(a, a), NumericError);
}

TEST_CASE("backward requires a scalar loss and a nonempty tape") {
  Graph<float> g;
  Var a = g.full({2, 2}, 1.f, true);
  Var b = g.add(a, a);
  CHECK_THROWS_AS(g.backward(b), ContractError);
}

TEST_CASE("d(x^2)/dx = 2x and d(sin x)/dx = cos x") {
  Graph<double> g;
  Var x = g.leaf({1}, std::vector<double>{3.0}, true);
  Var loss = g.mul(x, x);
  g.backward(loss);
  CHECK(g.grad(x)[0] == doctest::Approx(6.0).epsilon(1e-12));

  g.reset();
  Var x2 = g.leaf({1}, std::vector<double>{0.0}, true);
  Var loss2 = g.sin(x2);
  g.backward(loss2);
  CHECK(g.grad(x2)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forward evaluation is deterministic") {
  Rng rng(11);
  std::vector<float> in = {0.5f, -0.25f, 1.5f, 0.75f, -1.f, 2.f};
  auto run = [&in]() {
    Graph<float> g;
    Var x = g.constant({2, 3}, in);
    Var y = g.sigmoid(g.scale(g.sin(x), 1.7f));
    std::span<const float> v = g.value(y);
    return std::vector<float>(v.begin(), v.end());
  };
  CHECK(run() == run());
}

namespace {

// Random small tensors per op kind, gradients vs central differences.
void check_op(const char* name, const oracles::BuildFn& build,
              std::vector<std::vector<double>> values, double tol = 1e-4) {
  INFO("op: " << name);
  const oracles::GradCheckResult r = oracles::gradcheck(build, std::move(values));
  CHECK(r.checked > 0);
  CHECK(r.max_rel_err < tol);
}

}  // namespace

TEST_CASE("every differentiable op matches central finite differences") {
  Rng rng(1234);
  using G = Graph<double>;
  using VV = std::vector<std::vector<double>>;
  auto leaf = [](G& g, const VV& v, std::vector<Var>& out, int i, Shape s) {
    Var l = g.leaf(std::move(s), v[i], true);
    out.push_back(l);
    return l;
  };

  check_op("add",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             return g.sum(g.add(leaf(g, v, L, 0, {6}), leaf(g, v, L, 1, {6})));
           },
           {oracles::random_vec(rng, 6, -2, 2),
            oracles::random_vec(rng, 6, -2, 2)});
  check_op("sub+mul",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var a = leaf(g, v, L, 0, {6});
             Var b = leaf(g, v, L, 1, {6});
             return g.sum(g.mul(g.sub(a, b), a));
           },
           {oracles::random_vec(rng, 6, -2, 2),
            oracles::random_vec(rng, 6, -2, 2)});
  check_op("scale+add_scalar",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             return g.sum(g.add_scalar(g.scale(leaf(g, v, L, 0, {5}), -1.3), 0.7));
           },
           {oracles::random_vec(rng, 5, -2, 2)});
  check_op("matmul",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var a = leaf(g, v, L, 0, {3, 4});
             Var b = leaf(g, v, L, 1, {4, 2});
             return g.sum(g.mul(g.matmul(a, b), g.matmul(a, b)));
           },
           {oracles::random_vec(rng, 12, -1, 1),
            oracles::random_vec(rng, 8, -1, 1)});
  check_op("bias_add rows",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var x = leaf(g, v, L, 0, {3, 4});
             Var b = leaf(g, v, L, 1, {4});
             return g.mean(g.sin(g.bias_add(x, b)));
           },
           {oracles::random_vec(rng, 12, -1, 1),
            oracles::random_vec(rng, 4, -1, 1)});
  check_op("bias_add channels",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var x = leaf(g, v, L, 0, {2, 3, 2, 2});
             Var b = leaf(g, v, L, 1, {3});
             return g.mean(g.sin(g.bias_add(x, b)));
           },
           {oracles::random_vec(rng, 24, -1, 1),
            oracles::random_vec(rng, 3, -1, 1)});
  check_op("conv2d",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var x = leaf(g, v, L, 0, {2, 2, 4, 3});
             Var w = leaf(g, v, L, 1, {3, 2, 3, 3});
             Var y = g.conv2d(x, w);
             return g.sum(g.mul(y, y));
           },
           {oracles::random_vec(rng, 48, -1, 1),
            oracles::random_vec(rng, 54, -1, 1)});
  check_op("upsample2x",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var x = leaf(g, v, L, 0, {1, 2, 3, 2});
             return g.mean(g.sin(g.upsample2x(x)));
           },
           {oracles::random_vec(rng, 12, -1, 1)});
  check_op("crop2d",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var x = leaf(g, v, L, 0, {1, 2, 4, 4});
             return g.mean(g.mul(g.crop2d(x, 3, 2), g.crop2d(x, 3, 2)));
           },
           {oracles::random_vec(rng, 32, -1, 1)});
  check_op("sin",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             return g.sum(g.sin(leaf(g, v, L, 0, {7})));
           },
           {oracles::random_vec(rng, 7, -2, 2)});
  check_op("relu (inputs off the kink)",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             return g.sum(g.relu(leaf(g, v, L, 0, {9})));
           },
           {oracles::random_vec(rng, 9, -2, 2, 0.05)});
  check_op("sigmoid",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             return g.sum(g.sigmoid(leaf(g, v, L, 0, {9})));
           },
           {oracles::random_vec(rng, 9, -3, 3)});
  check_op("clamp01 (inputs off both kinks)",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var x = leaf(g, v, L, 0, {8});
             return g.sum(g.mul(g.clamp01(x), g.clamp01(x)));
           },
           {[&rng]() {
             std::vector<double> v = oracles::random_vec(rng, 8, -1, 2);
             for (double& x : v) {
               while (std::fabs(x) < 0.05 || std::fabs(x - 1.0) < 0.05)
                 x = rng.uniform(-1, 2);
             }
             return v;
           }()});
  check_op("concat axis1",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var a = leaf(g, v, L, 0, {2, 2, 2, 2});
             Var b = leaf(g, v, L, 1, {2, 1, 2, 2});
             Var y = g.concat(a, b, 1);
             return g.mean(g.mul(y, y));
           },
           {oracles::random_vec(rng, 16, -1, 1),
            oracles::random_vec(rng, 8, -1, 1)});
  check_op("reshape+slice",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             Var a = leaf(g, v, L, 0, {12});
             Var s = g.slice(a, 2, 8);
             return g.sum(g.mul(g.reshape(s, {2, 4}), g.reshape(s, {2, 4})));
           },
           {oracles::random_vec(rng, 12, -1, 1)});
  check_op("mean",
           [&](G& g, const VV& v, std::vector<Var>& L) {
             return g.mean(g.mul(leaf(g, v, L, 0, {10}), leaf(g, v, L, 1, {10})));
           },
           {oracles::random_vec(rng, 10, -1, 1),
            oracles::random_vec(rng, 10, -1, 1)});
}

TEST_CASE("two dense sin layers match finite differences end to end") {
  Rng rng(99);
  // 2 -> 5 -> 1 network with sin nonlinearity, random weights.
  oracles::BuildFn build = [](Graph<double>& g,
                              const std::vector<std::vector<double>>& v,
                              std::vector<Var>& L) {
    Var x = g.constant({4, 2}, v[4]);
    Var w1 = g.leaf({2, 5}, v[0], true);
    Var b1 = g.leaf({5}, v[1], true);
    Var w2 = g.leaf({5, 1}, v[2], true);
    Var b2 = g.leaf({1}, v[3], true);
    L = {w1, b1, w2, b2};
    Var h = g.sin(g.bias_add(g.matmul(x, w1), b1));
    Var out = g.sigmoid(g.bias_add(g.matmul(h, w2), b2));
    return g.mean(g.mul(out, out));
  };
  std::vector<std::vector<double>> values = {
      oracles::random_vec(rng, 10, -1, 1), oracles::random_vec(rng, 5, -1, 1),
      oracles::random_vec(rng, 5, -1, 1), oracles::random_vec(rng, 1, -1, 1),
      oracles::random_vec(rng, 8, -1, 1)};
  const auto r = oracles::gradcheck(build, values);
  CHECK(r.checked == 21);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("adam");

TEST_CASE("zero gradient leaves parameters untouched") {
  std::vector<float> p = {1.f, -2.f, 3.f};
  std::vector<float> g(3, 0.f);
  AdamState st(3, 0.01f);
  adam_step(p, g, st);
  CHECK(st.step_count == 1);
  CHECK(p == std::vector<float>{1.f, -2.f, 3.f});
}

TEST_CASE("first update magnitude is about lr, second within 1%") {
  // Hand recurrences with g = 0.5, lr = 0.01: m_hat = g, v_hat = g^2, so the
  // step is lr * g/|g| up to epsilon. Same again at step two.
  std::vector<float> p = {0.f};
  std::vector<float> g = {0.5f};
  AdamState st(1, 0.01f);
  adam_step(p, g, st);
  const double step1 = -p[0];
  CHECK(step1 == doctest::Approx(0.01).epsilon(1e-5));
  const double before = p[0];
  adam_step(p, g, st);
  const double step2 = before - p[0];
  CHECK(step2 == doctest::Approx(step1).epsilon(0.01));
  CHECK(st.step_count == 2);
}

TEST_CASE("shape mismatches are contract errors") {
  std::vector<float> p = {0.f, 0.f};
  std::vector<float> g = {0.5f};
  AdamState st(2, 0.01f);
  CHECK_THROWS_AS(adam_step(p, g, st), ContractError);
}

TEST_SUITE_END();
