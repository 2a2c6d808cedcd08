#pragma once

#include <vector>

#include "wsvc/errors.hpp"

namespace wsvc {

// H x W x 3 image, values in [0,1], row-major with interleaved RGB.
// Sources with 8-bit provenance carry exact k/255 values.
struct FrameBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // height*width*3

  FrameBuffer() = default;
  FrameBuffer(int w, int h, float fill = 0.f)
      : width(w), height(h),
        data(static_cast<size_t>(w) * h * 3, fill) {
    if (w < 1 || h < 1) throw ContractError("frame: dimensions must be >= 1");
  }

  float& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  size_t pixels() const { return static_cast<size_t>(width) * height; }
};

// Normalized coordinate set, one point per pixel (and per frame when
// frames > 1). Point order matches FrameBuffer memory order, frame-major.
struct CoordGrid {
  int width = 0;
  int height = 0;
  int frames = 1;
  int dim = 2;                // 2 for (x,y), 3 for (x,y,t)
  std::vector<float> data;    // count() * dim, each axis in [-1,1]

  size_t count() const {
    return static_cast<size_t>(width) * height * frames;
  }
  const float* point(size_t i) const { return data.data() + i * dim; }
};

// Each axis spans [-1, 1] inclusive; a single sample sits at 0.
inline float axis_norm(int i, int n) {
  return n == 1 ? 0.f
               : -1.f + 2.f * static_cast<float>(i) / static_cast<float>(n - 1);
}

CoordGrid coordinate_grid(int width, int height);
CoordGrid coordinate_grid(int width, int height, int n_frames);

}  // namespace wsvc
