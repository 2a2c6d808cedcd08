#include "wsvc/model_eval.hpp"

namespace wsvc {

ConvGeometry conv_geometry(const ModelSpec& spec, int width, int height) {
  if (width < 1 || height < 1)
    throw ConfigError("conv geometry: target resolution must be >= 1");
  ConvGeometry geo;
  geo.stages = static_cast<int>(spec.hidden_layers.size());
  const int f = 1 << geo.stages;
  geo.zh = (height + f - 1) / f;
  geo.zw = (width + f - 1) / f;
  geo.padded_h = geo.zh * f;
  geo.padded_w = geo.zw * f;
  return geo;
}

NoiseInput make_noise(const ModelSpec& spec, int width, int height,
                      int n_frames) {
  if (n_frames < 1) throw ContractError("make_noise: n_frames must be >= 1");
  const ConvGeometry geo = conv_geometry(spec, width, height);
  NoiseInput z;
  z.n_frames = n_frames;
  z.h = geo.zh;
  z.w = geo.zw;
  z.data.resize(static_cast<size_t>(n_frames) * z.channels * z.h * z.w);
  Rng rng(spec.noise_seed);
  for (float& v : z.data) v = rng.uniform_f(0.f, 0.1f);
  return z;
}

std::vector<float> fourier_matrix(const ModelSpec& spec, int coord_dim) {
  std::vector<float> b(static_cast<size_t>(spec.fourier_m) * coord_dim);
  Rng rng(spec.fourier_seed);
  for (float& v : b)
    v = static_cast<float>(rng.normal() * static_cast<double>(spec.fourier_sigma));
  return b;
}

namespace {
constexpr size_t kEvalChunk = 8192;
}

std::vector<float> eval_coordinate_points(const ModelSpec& spec,
                                          const ParamVector& params,
                                          std::span<const float> coords,
                                          int dim) {
  params.check_layout();
  if (dim != spec.coord_dim())
    throw ContractError("eval: coordinate dim " + std::to_string(dim) +
                        " does not match spec dim " +
                        std::to_string(spec.coord_dim()));
  const size_t n = coords.size() / dim;
  std::vector<float> bmat;
  if (spec.activation == Activation::fourier_relu)
    bmat = fourier_matrix(spec, dim);
  std::vector<float> out(n * 3);
  Graph<float> g;
  for (size_t base = 0; base < n; base += kEvalChunk) {
    const size_t cnt = std::min(kEvalChunk, n - base);
    g.reset();
    Var theta = g.constant({static_cast<int>(params.size())}, params.data);
    Var in;
    if (spec.activation == Activation::fourier_relu) {
      std::vector<float> feats = fourier_features<float, float>(
          coords.subspan(base * dim, cnt * dim), dim, bmat);
      in = g.constant({static_cast<int>(cnt), 2 * spec.fourier_m}, feats);
    } else {
      in = g.constant({static_cast<int>(cnt), dim},
                      coords.subspan(base * dim, cnt * dim));
    }
    Var colors = build_coordinate_forward(g, spec, theta, in, *params.layout);
    std::span<const float> v = g.value(colors);
    std::copy(v.begin(), v.end(), out.begin() + base * 3);
  }
  return out;
}

FrameBuffer eval_coordinate_model(const ModelSpec& spec,
                                  const ParamVector& params,
                                  const CoordGrid& grid, int frame_index) {
  if (frame_index < 0 || frame_index >= grid.frames)
    throw ContractError("eval: frame index out of range");
  if (grid.dim != spec.coord_dim())
    throw ContractError("eval: grid dim does not match spec");
  const size_t per = static_cast<size_t>(grid.width) * grid.height;
  std::span<const float> coords(grid.data.data() + per * grid.dim * frame_index,
                                per * grid.dim);
  std::vector<float> colors =
      eval_coordinate_points(spec, params, coords, grid.dim);
  FrameBuffer f(grid.width, grid.height);
  f.data = std::move(colors);
  return f;
}

FrameBuffer eval_conv_model(const ModelSpec& spec, const ParamVector& params,
                            const NoiseInput& z, int frame_index, int width,
                            int height) {
  params.check_layout();
  if (frame_index < 0 || frame_index >= z.n_frames)
    throw ContractError("eval: frame index out of range");
  const ConvGeometry geo = conv_geometry(spec, width, height);
  if (geo.zh != z.h || geo.zw != z.w)
    throw ContractError("eval: noise input does not match target geometry");
  Graph<float> g;
  Var theta = g.constant({static_cast<int>(params.size())}, params.data);
  Var zin = g.constant({1, z.channels, z.h, z.w}, z.frame(frame_index));
  Var out =
      build_conv_forward(g, spec, theta, zin, *params.layout, height, width);
  std::span<const float> v = g.value(out);  // planar (1,3,H,W)
  FrameBuffer f(width, height);
  const size_t hw = static_cast<size_t>(width) * height;
  for (size_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) f.data[p * 3 + c] = v[c * hw + p];
  return f;
}

FrameBuffer render_frame(const ModelSpec& spec, const ParamVector& params,
                         int width, int height, int n_frames, int t) {
  if (spec.paradigm == Paradigm::coordinate) {
    if (spec.temporal_mode == TemporalMode::full_sequence) {
      CoordGrid grid = coordinate_grid(width, height, n_frames);
      return eval_coordinate_model(spec, params, grid, t);
    }
    CoordGrid grid = coordinate_grid(width, height);
    return eval_coordinate_model(spec, params, grid, 0);
  }
  const bool seq = spec.temporal_mode == TemporalMode::full_sequence;
  NoiseInput z = make_noise(spec, width, height, seq ? n_frames : 1);
  return eval_conv_model(spec, params, z, seq ? t : 0, width, height);
}

}  // namespace wsvc
