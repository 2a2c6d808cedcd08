#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wsvc/dct.hpp"
#include "wsvc/errors.hpp"

namespace wsvc {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) n *= static_cast<size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

// Handle into a Graph. Graphs hand these out; they are only meaningful for
// the graph that created them.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

enum class OpKind : uint8_t {
  leaf,
  add,
  sub,
  mul,
  add_scalar,
  scale,
  matmul,
  bias_add,
  conv2d,
  upsample2x,
  crop2d,
  sin_op,
  relu,
  sigmoid,
  clamp01,
  concat,
  reshape,
  slice,
  sum_all,
  mean_all,
  dct_fwd,
  dct_inv,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::bias_add: return "bias_add";
    case OpKind::conv2d: return "conv2d";
    case OpKind::upsample2x: return "upsample2x";
    case OpKind::crop2d: return "crop2d";
    case OpKind::sin_op: return "sin";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::clamp01: return "clamp01";
    case OpKind::concat: return "concat";
    case OpKind::reshape: return "reshape";
    case OpKind::slice: return "slice";
    case OpKind::sum_all: return "sum";
    case OpKind::mean_all: return "mean";
    case OpKind::dct_fwd: return "dct_fwd";
    case OpKind::dct_inv: return "dct_inv";
  }
  return "?";
}

// Reverse-mode tape over dense tensors. Each recorded op keeps its output
// value; backward() walks the records once, in reverse order. Sized for
// networks of a few million parameters on a CPU; no broadcasting beyond
// scalar attributes, no views except reshape/slice.
template <typename T>
class Graph {
 public:
  Graph() = default;

  void reserve(size_t nodes) { nodes_.reserve(nodes); }

  // Drops all recorded ops and values. Handles from before are invalid.
  void reset() { nodes_.clear(); }

  size_t size() const { return nodes_.size(); }

  Var leaf(Shape shape, std::span<const T> values, bool requires_grad) {
    if (values.size() != shape_numel(shape))
      throw ShapeError("leaf: data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    Node n;
    n.kind = OpKind::leaf;
    n.shape = std::move(shape);
    n.value.assign(values.begin(), values.end());
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  Var constant(Shape shape, std::span<const T> values) {
    return leaf(std::move(shape), values, false);
  }

  Var full(Shape shape, T fill, bool requires_grad = false) {
    Node n;
    n.kind = OpKind::leaf;
    n.value.assign(shape_numel(shape), fill);
    n.shape = std::move(shape);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  Var add(Var a, Var b) { return binary_elementwise(OpKind::add, a, b); }
  Var sub(Var a, Var b) { return binary_elementwise(OpKind::sub, a, b); }
  Var mul(Var a, Var b) { return binary_elementwise(OpKind::mul, a, b); }

  Var add_scalar(Var a, T c) { return unary_scalar(OpKind::add_scalar, a, c); }
  Var scale(Var a, T c) { return unary_scalar(OpKind::scale, a, c); }

  Var sin(Var a) { return unary(OpKind::sin_op, a); }
  Var relu(Var a) { return unary(OpKind::relu, a); }
  Var sigmoid(Var a) { return unary(OpKind::sigmoid, a); }
  Var clamp01(Var a) { return unary(OpKind::clamp01, a); }

  // (M,K) x (K,N) -> (M,N)
  Var matmul(Var a, Var b) {
    const Node& na = at(a);
    const Node& nb = at(b);
    if (na.shape.size() != 2 || nb.shape.size() != 2 ||
        na.shape[1] != nb.shape[0])
      throw ShapeError(std::string("matmul: incompatible shapes ") +
                       shape_str(na.shape) + " and " + shape_str(nb.shape));
    Node n = make(OpKind::matmul, {a.id, b.id});
    n.shape = {na.shape[0], nb.shape[1]};
    n.value.assign(shape_numel(n.shape), T(0));
    const int m = na.shape[0], k = na.shape[1], p = nb.shape[1];
    const T* A = na.value.data();
    const T* B = nb.value.data();
    T* C = n.value.data();
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < k; ++l) {
        const T aa = A[i * k + l];
        const T* brow = B + l * p;
        T* crow = C + i * p;
        for (int j = 0; j < p; ++j) crow[j] += aa * brow[j];
      }
    return finish(std::move(n));
  }

  // Row bias: (B,F)+(F). Channel bias: (N,C,H,W)+(C).
  Var bias_add(Var x, Var b) {
    const Node& nx = at(x);
    const Node& nb = at(b);
    if (nb.shape.size() != 1)
      throw ShapeError(std::string("bias_add: bias must be rank 1, got ") +
                       shape_str(nb.shape));
    Node n = make(OpKind::bias_add, {x.id, b.id});
    n.shape = nx.shape;
    n.value = nx.value;
    if (nx.shape.size() == 2 && nx.shape[1] == nb.shape[0]) {
      const int rows = nx.shape[0], f = nx.shape[1];
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < f; ++j) n.value[i * f + j] += nb.value[j];
    } else if (nx.shape.size() == 4 && nx.shape[1] == nb.shape[0]) {
      const int nn = nx.shape[0], c = nx.shape[1];
      const size_t hw = static_cast<size_t>(nx.shape[2]) * nx.shape[3];
      for (int i = 0; i < nn; ++i)
        for (int j = 0; j < c; ++j) {
          T* p = n.value.data() + (static_cast<size_t>(i) * c + j) * hw;
          const T bv = nb.value[j];
          for (size_t q = 0; q < hw; ++q) p[q] += bv;
        }
    } else {
      throw ShapeError(std::string("bias_add: incompatible shapes ") +
                       shape_str(nx.shape) + " and " + shape_str(nb.shape));
    }
    return finish(std::move(n));
  }

  // x: (N,Cin,H,W), w: (Cout,Cin,kh,kw), stride 1, same zero padding,
  // odd kernel sizes only. Output (N,Cout,H,W).
  Var conv2d(Var x, Var w) {
    const Node& nx = at(x);
    const Node& nw = at(w);
    if (nx.shape.size() != 4 || nw.shape.size() != 4 ||
        nx.shape[1] != nw.shape[1] || nw.shape[2] % 2 == 0 ||
        nw.shape[3] % 2 == 0)
      throw ShapeError(std::string("conv2d: incompatible shapes ") +
                       shape_str(nx.shape) + " and " + shape_str(nw.shape));
    const int batch = nx.shape[0], cin = nx.shape[1], h = nx.shape[2],
              wdt = nx.shape[3];
    const int cout = nw.shape[0], kh = nw.shape[2], kw = nw.shape[3];
    const int ph = kh / 2, pw = kw / 2;
    Node n = make(OpKind::conv2d, {x.id, w.id});
    n.shape = {batch, cout, h, wdt};
    n.value.assign(shape_numel(n.shape), T(0));
    const T* X = nx.value.data();
    const T* W = nw.value.data();
    T* Y = n.value.data();
    for (int ni = 0; ni < batch; ++ni)
      for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci) {
          const T* xp = X + ((static_cast<size_t>(ni) * cin + ci) * h) * wdt;
          const T* wp = W + ((static_cast<size_t>(co) * cin + ci) * kh) * kw;
          T* yp = Y + ((static_cast<size_t>(ni) * cout + co) * h) * wdt;
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const T wv = wp[ky * kw + kx];
              if (wv == T(0)) continue;
              const int y0 = std::max(0, ph - ky), y1 = std::min(h, h + ph - ky);
              const int x0 = std::max(0, pw - kx), x1 = std::min(wdt, wdt + pw - kx);
              for (int oy = y0; oy < y1; ++oy) {
                const T* xrow = xp + (oy + ky - ph) * wdt + (kx - pw);
                T* yrow = yp + oy * wdt;
                for (int ox = x0; ox < x1; ++ox) yrow[ox] += wv * xrow[ox];
              }
            }
        }
    return finish(std::move(n));
  }

  // Nearest-neighbor 2x upsample: (N,C,H,W) -> (N,C,2H,2W).
  Var upsample2x(Var x) {
    const Node& nx = at(x);
    if (nx.shape.size() != 4)
      throw ShapeError(std::string("upsample2x: want rank 4, got ") +
                       shape_str(nx.shape));
    const int batch = nx.shape[0], c = nx.shape[1], h = nx.shape[2],
              w = nx.shape[3];
    Node n = make(OpKind::upsample2x, {x.id});
    n.shape = {batch, c, 2 * h, 2 * w};
    n.value.resize(shape_numel(n.shape));
    const T* X = nx.value.data();
    T* Y = n.value.data();
    for (size_t nc = 0; nc < static_cast<size_t>(batch) * c; ++nc) {
      const T* xp = X + nc * h * w;
      T* yp = Y + nc * (4 * static_cast<size_t>(h) * w);
      for (int y = 0; y < h; ++y)
        for (int x2 = 0; x2 < w; ++x2) {
          const T v = xp[y * w + x2];
          T* o = yp + (2 * y) * (2 * w) + 2 * x2;
          o[0] = v;
          o[1] = v;
          o[2 * w] = v;
          o[2 * w + 1] = v;
        }
    }
    return finish(std::move(n));
  }

  // Keep the top-left (th, tw) window of each plane.
  Var crop2d(Var x, int th, int tw) {
    const Node& nx = at(x);
    if (nx.shape.size() != 4 || th < 1 || tw < 1 || th > nx.shape[2] ||
        tw > nx.shape[3])
      throw ShapeError("crop2d: cannot crop " + shape_str(nx.shape) + " to [" +
                       std::to_string(th) + "," + std::to_string(tw) + "]");
    const int batch = nx.shape[0], c = nx.shape[1], h = nx.shape[2],
              w = nx.shape[3];
    Node n = make(OpKind::crop2d, {x.id});
    n.shape = {batch, c, th, tw};
    n.value.resize(shape_numel(n.shape));
    const T* X = nx.value.data();
    T* Y = n.value.data();
    for (size_t nc = 0; nc < static_cast<size_t>(batch) * c; ++nc)
      for (int y = 0; y < th; ++y)
        for (int x2 = 0; x2 < tw; ++x2)
          Y[nc * th * tw + y * tw + x2] = X[nc * h * w + y * w + x2];
    return finish(std::move(n));
  }

  // Concatenate along one axis; all other dims must match.
  Var concat(Var a, Var b, int axis) {
    const Node& na = at(a);
    const Node& nb = at(b);
    if (na.shape.size() != nb.shape.size() || axis < 0 ||
        axis >= static_cast<int>(na.shape.size()))
      throw ShapeError(std::string("concat: incompatible shapes ") +
                       shape_str(na.shape) + " and " + shape_str(nb.shape));
    for (size_t i = 0; i < na.shape.size(); ++i)
      if (static_cast<int>(i) != axis && na.shape[i] != nb.shape[i])
        throw ShapeError(std::string("concat: incompatible shapes ") +
                         shape_str(na.shape) + " and " + shape_str(nb.shape));
    Node n = make(OpKind::concat, {a.id, b.id});
    n.iattr0 = axis;
    n.shape = na.shape;
    n.shape[axis] += nb.shape[axis];
    n.value.resize(shape_numel(n.shape));
    size_t outer = 1;
    for (int i = 0; i < axis; ++i) outer *= na.shape[i];
    size_t inner = 1;
    for (size_t i = axis + 1; i < na.shape.size(); ++i) inner *= na.shape[i];
    const size_t wa = na.shape[axis] * inner, wb = nb.shape[axis] * inner;
    for (size_t o = 0; o < outer; ++o) {
      std::copy_n(na.value.data() + o * wa, wa, n.value.data() + o * (wa + wb));
      std::copy_n(nb.value.data() + o * wb, wb,
                  n.value.data() + o * (wa + wb) + wa);
    }
    return finish(std::move(n));
  }

  Var reshape(Var a, Shape shape) {
    const Node& na = at(a);
    if (shape_numel(shape) != na.value.size())
      throw ShapeError(std::string("reshape: cannot reshape ") +
                       shape_str(na.shape) + " to " + shape_str(shape));
    Node n = make(OpKind::reshape, {a.id});
    n.shape = std::move(shape);
    n.value = na.value;
    return finish(std::move(n));
  }

  // Contiguous sub-range of a rank-1 tensor.
  Var slice(Var a, size_t offset, size_t len) {
    const Node& na = at(a);
    if (na.shape.size() != 1 || offset + len > na.value.size())
      throw ShapeError("slice: range [" + std::to_string(offset) + "," +
                       std::to_string(offset + len) + ") out of bounds for " +
                       shape_str(na.shape));
    Node n = make(OpKind::slice, {a.id});
    n.iattr0 = static_cast<int64_t>(offset);
    n.shape = {static_cast<int>(len)};
    n.value.assign(na.value.begin() + offset, na.value.begin() + offset + len);
    return finish(std::move(n));
  }

  Var sum(Var a) {
    Node n = make(OpKind::sum_all, {a.id});
    n.shape = {1};
    T acc = 0;
    for (T v : at(a).value) acc += v;
    n.value = {acc};
    return finish(std::move(n));
  }

  Var mean(Var a) {
    const Node& na = at(a);
    if (na.value.empty())
      throw ShapeError("mean: empty tensor");
    Node n = make(OpKind::mean_all, {a.id});
    n.shape = {1};
    T acc = 0;
    for (T v : na.value) acc += v;
    n.value = {acc / static_cast<T>(na.value.size())};
    return finish(std::move(n));
  }

  // Orthonormal DCT-II applied per sequence of the layout; input is the flat
  // vector the layout tiles. dct_inv is the DCT-III inverse.
  Var dct_fwd(Var a, std::shared_ptr<const DctLayout> layout) {
    return dct_op(OpKind::dct_fwd, a, std::move(layout));
  }
  Var dct_inv(Var a, std::shared_ptr<const DctLayout> layout) {
    return dct_op(OpKind::dct_inv, a, std::move(layout));
  }

  // Seeds d(loss)/d(node) and sweeps the tape once in reverse. loss must be
  // scalar. Gradients of requires_grad nodes are readable via grad() after.
  void backward(Var loss) {
    Node& ln = at_mut(loss);
    if (ln.value.size() != 1)
      throw ContractError("backward: loss must be scalar, got shape " +
                          shape_str(ln.shape));
    if (nodes_.empty()) throw ContractError("backward: empty tape");
    for (Node& n : nodes_)
      if (n.requires_grad) n.grad.assign(n.value.size(), T(0));
    ln.grad.assign(1, T(1));
    if (!ln.requires_grad) return;
    for (int32_t id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      propagate(n);
    }
  }

  const Shape& shape(Var v) const { return at(v).shape; }
  std::span<const T> value(Var v) const { return at(v).value; }
  std::span<const T> grad(Var v) const {
    const Node& n = at(v);
    if (n.grad.empty())
      throw ContractError("grad: node has no gradient (did backward run?)");
    return n.grad;
  }
  bool requires_grad(Var v) const { return at(v).requires_grad; }

  // Overwrite a leaf's values in place (shape preserved). Lets training
  // loops reuse one warm tape layout without rebuilding leaves.
  void set_leaf(Var v, std::span<const T> values) {
    Node& n = at_mut(v);
    if (n.kind != OpKind::leaf)
      throw ContractError("set_leaf: node is not a leaf");
    if (values.size() != n.value.size())
      throw ShapeError("set_leaf: size mismatch");
    std::copy(values.begin(), values.end(), n.value.begin());
  }

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    bool requires_grad = false;
    std::array<int32_t, 2> in{-1, -1};
    int64_t iattr0 = 0;
    int64_t iattr1 = 0;
    T sattr = 0;
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::shared_ptr<const DctLayout> layout;
  };

  std::vector<Node> nodes_;

  const Node& at(Var v) const {
    if (!v.valid() || v.id >= static_cast<int32_t>(nodes_.size()))
      throw ContractError("invalid tensor handle");
    return nodes_[v.id];
  }
  Node& at_mut(Var v) {
    return const_cast<Node&>(static_cast<const Graph*>(this)->at(v));
  }

  Node make(OpKind kind, std::initializer_list<int32_t> ins) {
    Node n;
    n.kind = kind;
    int i = 0;
    for (int32_t id : ins) {
      n.in[i++] = id;
      if (nodes_[id].requires_grad) n.requires_grad = true;
    }
    return n;
  }

  Var push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
  }

  Var finish(Node&& n) {
    check_finite(n);
    return push(std::move(n));
  }

  void check_finite(const Node& n) const {
    for (T v : n.value)
      if (!std::isfinite(static_cast<double>(v)))
        throw NumericError(std::string("non-finite value in output of op '") +
                           op_name(n.kind) + "'");
  }

  Var binary_elementwise(OpKind kind, Var a, Var b) {
    const Node& na = at(a);
    const Node& nb = at(b);
    if (na.shape != nb.shape)
      throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " +
                       shape_str(na.shape) + " and " + shape_str(nb.shape));
    Node n = make(kind, {a.id, b.id});
    n.shape = na.shape;
    n.value.resize(na.value.size());
    const T* A = na.value.data();
    const T* B = nb.value.data();
    T* C = n.value.data();
    const size_t cnt = n.value.size();
    switch (kind) {
      case OpKind::add:
        for (size_t i = 0; i < cnt; ++i) C[i] = A[i] + B[i];
        break;
      case OpKind::sub:
        for (size_t i = 0; i < cnt; ++i) C[i] = A[i] - B[i];
        break;
      case OpKind::mul:
        for (size_t i = 0; i < cnt; ++i) C[i] = A[i] * B[i];
        break;
      default:
        throw ContractError("bad binary op");
    }
    return finish(std::move(n));
  }

  Var unary_scalar(OpKind kind, Var a, T c) {
    const Node& na = at(a);
    Node n = make(kind, {a.id});
    n.sattr = c;
    n.shape = na.shape;
    n.value.resize(na.value.size());
    const T* A = na.value.data();
    T* C = n.value.data();
    const size_t cnt = n.value.size();
    if (kind == OpKind::add_scalar)
      for (size_t i = 0; i < cnt; ++i) C[i] = A[i] + c;
    else
      for (size_t i = 0; i < cnt; ++i) C[i] = A[i] * c;
    return finish(std::move(n));
  }

  Var unary(OpKind kind, Var a) {
    const Node& na = at(a);
    Node n = make(kind, {a.id});
    n.shape = na.shape;
    n.value.resize(na.value.size());
    const T* A = na.value.data();
    T* C = n.value.data();
    const size_t cnt = n.value.size();
    switch (kind) {
      case OpKind::sin_op:
        for (size_t i = 0; i < cnt; ++i) C[i] = std::sin(A[i]);
        break;
      case OpKind::relu:
        for (size_t i = 0; i < cnt; ++i) C[i] = A[i] > T(0) ? A[i] : T(0);
        break;
      case OpKind::sigmoid:
        for (size_t i = 0; i < cnt; ++i) C[i] = T(1) / (T(1) + std::exp(-A[i]));
        break;
      case OpKind::clamp01:
        for (size_t i = 0; i < cnt; ++i)
          C[i] = A[i] < T(0) ? T(0) : (A[i] > T(1) ? T(1) : A[i]);
        break;
      default:
        throw ContractError("bad unary op");
    }
    return finish(std::move(n));
  }

  Var dct_op(OpKind kind, Var a, std::shared_ptr<const DctLayout> layout) {
    const Node& na = at(a);
    if (!layout) throw ContractError("dct: null layout");
    if (na.shape.size() != 1 || na.value.size() != layout->total)
      throw ShapeError(std::string(op_name(kind)) + ": layout tiles " +
                       std::to_string(layout->total) + " values, input is " +
                       shape_str(na.shape));
    Node n = make(kind, {a.id});
    n.shape = na.shape;
    n.layout = std::move(layout);
    n.value.resize(na.value.size());
    if (kind == OpKind::dct_fwd)
      dct_layout_forward<T>(na.value, n.value, *n.layout);
    else
      dct_layout_inverse<T>(na.value, n.value, *n.layout);
    return finish(std::move(n));
  }

  void add_grad(int32_t id, size_t i, T v) { nodes_[id].grad[i] += v; }

  void propagate(Node& n) {
    const std::vector<T>& g = n.grad;
    switch (n.kind) {
      case OpKind::leaf:
        return;
      case OpKind::add: {
        for (int s = 0; s < 2; ++s) {
          Node& in = nodes_[n.in[s]];
          if (!in.requires_grad) continue;
          for (size_t i = 0; i < g.size(); ++i) in.grad[i] += g[i];
        }
        return;
      }
      case OpKind::sub: {
        if (Node& a = nodes_[n.in[0]]; a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
        if (Node& b = nodes_[n.in[1]]; b.requires_grad)
          for (size_t i = 0; i < g.size(); ++i) b.grad[i] -= g[i];
        return;
      }
      case OpKind::mul: {
        Node& a = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        if (a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * b.value[i];
        if (b.requires_grad)
          for (size_t i = 0; i < g.size(); ++i) b.grad[i] += g[i] * a.value[i];
        return;
      }
      case OpKind::add_scalar: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
        return;
      }
      case OpKind::scale: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * n.sattr;
        return;
      }
      case OpKind::matmul: {
        Node& a = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        const int m = a.shape[0], k = a.shape[1], p = b.shape[1];
        if (a.requires_grad) {
          // dA = g . B^T
          for (int i = 0; i < m; ++i)
            for (int l = 0; l < k; ++l) {
              T acc = 0;
              const T* grow = g.data() + static_cast<size_t>(i) * p;
              const T* brow = b.value.data() + static_cast<size_t>(l) * p;
              for (int j = 0; j < p; ++j) acc += grow[j] * brow[j];
              a.grad[static_cast<size_t>(i) * k + l] += acc;
            }
        }
        if (b.requires_grad) {
          // dB = A^T . g
          for (int i = 0; i < m; ++i) {
            const T* arow = a.value.data() + static_cast<size_t>(i) * k;
            const T* grow = g.data() + static_cast<size_t>(i) * p;
            for (int l = 0; l < k; ++l) {
              const T av = arow[l];
              if (av == T(0)) continue;
              T* brow = b.grad.data() + static_cast<size_t>(l) * p;
              for (int j = 0; j < p; ++j) brow[j] += av * grow[j];
            }
          }
        }
        return;
      }
      case OpKind::bias_add: {
        Node& x = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        if (x.requires_grad)
          for (size_t i = 0; i < g.size(); ++i) x.grad[i] += g[i];
        if (b.requires_grad) {
          if (x.shape.size() == 2) {
            const int rows = x.shape[0], f = x.shape[1];
            for (int i = 0; i < rows; ++i)
              for (int j = 0; j < f; ++j)
                b.grad[j] += g[static_cast<size_t>(i) * f + j];
          } else {
            const int batch = x.shape[0], c = x.shape[1];
            const size_t hw = static_cast<size_t>(x.shape[2]) * x.shape[3];
            for (int i = 0; i < batch; ++i)
              for (int j = 0; j < c; ++j) {
                const T* gp = g.data() + (static_cast<size_t>(i) * c + j) * hw;
                T acc = 0;
                for (size_t q = 0; q < hw; ++q) acc += gp[q];
                b.grad[j] += acc;
              }
          }
        }
        return;
      }
      case OpKind::conv2d: {
        Node& x = nodes_[n.in[0]];
        Node& w = nodes_[n.in[1]];
        const int batch = x.shape[0], cin = x.shape[1], h = x.shape[2],
                  wd = x.shape[3];
        const int cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
        const int ph = kh / 2, pw = kw / 2;
        for (int ni = 0; ni < batch; ++ni)
          for (int co = 0; co < cout; ++co) {
            const T* gp =
                g.data() + ((static_cast<size_t>(ni) * cout + co) * h) * wd;
            for (int ci = 0; ci < cin; ++ci) {
              const T* xp =
                  x.value.data() +
                  ((static_cast<size_t>(ni) * cin + ci) * h) * wd;
              const T* wp =
                  w.value.data() +
                  ((static_cast<size_t>(co) * cin + ci) * kh) * kw;
              T* xg = x.requires_grad
                          ? x.grad.data() +
                                ((static_cast<size_t>(ni) * cin + ci) * h) * wd
                          : nullptr;
              T* wg = w.requires_grad
                          ? w.grad.data() +
                                ((static_cast<size_t>(co) * cin + ci) * kh) * kw
                          : nullptr;
              for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                  const int y0 = std::max(0, ph - ky),
                            y1 = std::min(h, h + ph - ky);
                  const int x0 = std::max(0, pw - kx),
                            x1 = std::min(wd, wd + pw - kx);
                  const T wv = wp[ky * kw + kx];
                  T wacc = 0;
                  for (int oy = y0; oy < y1; ++oy) {
                    const T* grow = gp + oy * wd;
                    const size_t xoff =
                        static_cast<size_t>(oy + ky - ph) * wd + (kx - pw);
                    if (xg) {
                      T* xrow = xg + xoff;
                      for (int ox = x0; ox < x1; ++ox)
                        xrow[ox] += wv * grow[ox];
                    }
                    if (wg) {
                      const T* xrow = xp + xoff;
                      for (int ox = x0; ox < x1; ++ox)
                        wacc += grow[ox] * xrow[ox];
                    }
                  }
                  if (wg) wg[ky * kw + kx] += wacc;
                }
            }
          }
        return;
      }
      case OpKind::upsample2x: {
        Node& x = nodes_[n.in[0]];
        if (!x.requires_grad) return;
        const int h = x.shape[2], w = x.shape[3];
        const size_t planes = static_cast<size_t>(x.shape[0]) * x.shape[1];
        for (size_t nc = 0; nc < planes; ++nc) {
          const T* gp = g.data() + nc * (4 * static_cast<size_t>(h) * w);
          T* xp = x.grad.data() + nc * h * w;
          for (int y = 0; y < h; ++y)
            for (int x2 = 0; x2 < w; ++x2) {
              const T* o = gp + (2 * y) * (2 * w) + 2 * x2;
              xp[y * w + x2] += o[0] + o[1] + o[2 * w] + o[2 * w + 1];
            }
        }
        return;
      }
      case OpKind::crop2d: {
        Node& x = nodes_[n.in[0]];
        if (!x.requires_grad) return;
        const int h = x.shape[2], w = x.shape[3];
        const int th = n.shape[2], tw = n.shape[3];
        const size_t planes = static_cast<size_t>(x.shape[0]) * x.shape[1];
        for (size_t nc = 0; nc < planes; ++nc)
          for (int y = 0; y < th; ++y)
            for (int x2 = 0; x2 < tw; ++x2)
              x.grad[nc * h * w + y * w + x2] += g[nc * th * tw + y * tw + x2];
        return;
      }
      case OpKind::sin_op: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i)
            a.grad[i] += g[i] * std::cos(a.value[i]);
        return;
      }
      case OpKind::relu: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i)
            if (a.value[i] > T(0)) a.grad[i] += g[i];
        return;
      }
      case OpKind::sigmoid: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i)
            a.grad[i] += g[i] * n.value[i] * (T(1) - n.value[i]);
        return;
      }
      case OpKind::clamp01: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i)
            if (a.value[i] > T(0) && a.value[i] < T(1)) a.grad[i] += g[i];
        return;
      }
      case OpKind::concat: {
        Node& a = nodes_[n.in[0]];
        Node& b = nodes_[n.in[1]];
        const int axis = static_cast<int>(n.iattr0);
        size_t outer = 1;
        for (int i = 0; i < axis; ++i) outer *= a.shape[i];
        size_t inner = 1;
        for (size_t i = axis + 1; i < a.shape.size(); ++i) inner *= a.shape[i];
        const size_t wa = a.shape[axis] * inner, wb = b.shape[axis] * inner;
        for (size_t o = 0; o < outer; ++o) {
          const T* go = g.data() + o * (wa + wb);
          if (a.requires_grad)
            for (size_t i = 0; i < wa; ++i) a.grad[o * wa + i] += go[i];
          if (b.requires_grad)
            for (size_t i = 0; i < wb; ++i) b.grad[o * wb + i] += go[wa + i];
        }
        return;
      }
      case OpKind::reshape: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad)
          for (size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
        return;
      }
      case OpKind::slice: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad) {
          const size_t off = static_cast<size_t>(n.iattr0);
          for (size_t i = 0; i < g.size(); ++i) a.grad[off + i] += g[i];
        }
        return;
      }
      case OpKind::sum_all: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad)
          for (size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += g[0];
        return;
      }
      case OpKind::mean_all: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad) {
          const T s = g[0] / static_cast<T>(a.grad.size());
          for (size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += s;
        }
        return;
      }
      case OpKind::dct_fwd: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad) {
          std::vector<T> tmp(g.size());
          dct_layout_inverse<T>(g, tmp, *n.layout);
          for (size_t i = 0; i < tmp.size(); ++i) a.grad[i] += tmp[i];
        }
        return;
      }
      case OpKind::dct_inv: {
        Node& a = nodes_[n.in[0]];
        if (a.requires_grad) {
          std::vector<T> tmp(g.size());
          dct_layout_forward<T>(g, tmp, *n.layout);
          for (size_t i = 0; i < tmp.size(); ++i) a.grad[i] += tmp[i];
        }
        return;
      }
    }
  }
};

}  // namespace wsvc
