#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "wsvc/frame.hpp"
#include "wsvc/graph.hpp"
#include "wsvc/model_spec.hpp"
#include "wsvc/param_vector.hpp"
#include "wsvc/rng.hpp"

namespace wsvc {

// Fixed random input(s) to the conv generator, regenerated bit-identically
// from the model's noise seed. Frame i uses plane block i.
struct NoiseInput {
  int n_frames = 1;
  int channels = kNoiseChannels;
  int h = 0;
  int w = 0;
  std::vector<float> data;  // n_frames * channels * h * w

  std::span<const float> frame(int i) const {
    const size_t per = static_cast<size_t>(channels) * h * w;
    return {data.data() + per * i, per};
  }
};

// Spatial bookkeeping for the conv generator: the noise input is small
// enough that hidden_layers.size() nearest-neighbor 2x stages land on the
// padded target, and the padded output is cropped to (width, height).
struct ConvGeometry {
  int stages = 0;
  int zh = 0, zw = 0;
  int padded_h = 0, padded_w = 0;
};

ConvGeometry conv_geometry(const ModelSpec& spec, int width, int height);
NoiseInput make_noise(const ModelSpec& spec, int width, int height,
                      int n_frames);

// Random Fourier projection matrix, m x d row-major, entries N(0, sigma^2)
// drawn from the spec's fourier seed.
std::vector<float> fourier_matrix(const ModelSpec& spec, int coord_dim);

// features(v) = [cos(2*pi*B*v), sin(2*pi*B*v)]; output n x 2m, cos block
// first. Computation in double, rounded to T.
template <typename T, typename U>
std::vector<T> fourier_features(std::span<const U> coords, int dim,
                                std::span<const float> bmat) {
  if (dim < 1 || coords.size() % dim != 0)
    throw ContractError("fourier_features: coords not divisible by dim");
  if (bmat.size() % dim != 0)
    throw ContractError(
        "fourier_features: projection matrix does not match coord dim");
  const size_t n = coords.size() / dim;
  const size_t m = bmat.size() / dim;
  std::vector<T> out(n * 2 * m);
  constexpr double kTwoPi = 6.28318530717958647692;
  for (size_t i = 0; i < n; ++i) {
    const U* v = coords.data() + i * dim;
    T* row = out.data() + i * 2 * m;
    for (size_t j = 0; j < m; ++j) {
      double dot = 0;
      for (int k = 0; k < dim; ++k)
        dot += static_cast<double>(bmat[j * dim + k]) * static_cast<double>(v[k]);
      row[j] = static_cast<T>(std::cos(kTwoPi * dot));
      row[m + j] = static_cast<T>(std::sin(kTwoPi * dot));
    }
  }
  return out;
}

// Builds the coordinate network forward pass on the tape. `inputs` is the
// B x din feature tensor (raw coords for siren, Fourier features otherwise);
// `theta` is the flat parameter vector matching `layout`. Returns B x 3
// colors in [0,1].
template <typename T>
Var build_coordinate_forward(Graph<T>& g, const ModelSpec& spec, Var theta,
                             Var inputs, const ParamLayout& layout) {
  Var h = inputs;
  const size_t n_layers = layout.blocks.size() / 2;
  for (size_t i = 0; i < n_layers; ++i) {
    const BlockDesc& wb = layout.blocks[2 * i];
    const BlockDesc& bb = layout.blocks[2 * i + 1];
    Var w = g.reshape(g.slice(theta, wb.offset, wb.size), wb.shape);
    Var b = g.slice(theta, bb.offset, bb.size);
    h = g.bias_add(g.matmul(h, w), b);
    if (i + 1 < n_layers) {
      if (spec.activation == Activation::siren)
        h = g.sin(g.scale(h, static_cast<T>(spec.omega0)));
      else
        h = g.relu(h);
    }
  }
  return g.sigmoid(h);
}

// Builds the conv generator forward pass: (conv -> relu -> upsample2x) per
// stage with optional long-distance skips (noise concatenated back in at
// every later stage), then a 3-channel head and sigmoid, cropped to the
// requested size. `z` is (N, kNoiseChannels, zh, zw). Returns (N,3,H,W).
template <typename T>
Var build_conv_forward(Graph<T>& g, const ModelSpec& spec, Var theta, Var z,
                       const ParamLayout& layout, int out_h, int out_w) {
  Var x = z;
  Var zup = z;
  const size_t n_stages = spec.hidden_layers.size();
  for (size_t i = 0; i < n_stages; ++i) {
    if (spec.skip_connections && i > 0) {
      zup = g.upsample2x(zup);
      x = g.concat(x, zup, 1);
    }
    const BlockDesc& wb = layout.blocks[2 * i];
    const BlockDesc& bb = layout.blocks[2 * i + 1];
    Var w = g.reshape(g.slice(theta, wb.offset, wb.size), wb.shape);
    Var b = g.slice(theta, bb.offset, bb.size);
    x = g.upsample2x(g.relu(g.bias_add(g.conv2d(x, w), b)));
  }
  const BlockDesc& wb = layout.blocks[2 * n_stages];
  const BlockDesc& bb = layout.blocks[2 * n_stages + 1];
  Var w = g.reshape(g.slice(theta, wb.offset, wb.size), wb.shape);
  Var b = g.slice(theta, bb.offset, bb.size);
  x = g.sigmoid(g.bias_add(g.conv2d(x, w), b));
  const Shape& s = g.shape(x);
  if (s[2] != out_h || s[3] != out_w) x = g.crop2d(x, out_h, out_w);
  return x;
}

// Colors for arbitrary coordinate points (row-major count x dim), evaluated
// in fixed-size chunks. Returns count x 3.
std::vector<float> eval_coordinate_points(const ModelSpec& spec,
                                          const ParamVector& params,
                                          std::span<const float> coords,
                                          int dim);

// Renders one frame of the coordinate model over the given grid.
FrameBuffer eval_coordinate_model(const ModelSpec& spec,
                                  const ParamVector& params,
                                  const CoordGrid& grid, int frame_index = 0);

// Renders one frame of the conv generator from its noise input.
FrameBuffer eval_conv_model(const ModelSpec& spec, const ParamVector& params,
                            const NoiseInput& z, int frame_index, int width,
                            int height);

// Paradigm dispatch used by codec decode and encoder-side reporting: renders
// frame `t` of an `n_frames`-long (sub)sequence from flat params only.
FrameBuffer render_frame(const ModelSpec& spec, const ParamVector& params,
                         int width, int height, int n_frames, int t);

}  // namespace wsvc
