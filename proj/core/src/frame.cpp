#include "wsvc/frame.hpp"

namespace wsvc {

CoordGrid coordinate_grid(int width, int height, int n_frames) {
  if (width < 1 || height < 1 || n_frames < 1)
    throw ContractError("coordinate_grid: dimensions must be >= 1");
  CoordGrid g;
  g.width = width;
  g.height = height;
  g.frames = n_frames;
  // The 3-arg overload always carries t, even for one frame (t = 0).
  g.dim = 3;
  g.data.resize(g.count() * 3);
  size_t k = 0;
  for (int t = 0; t < n_frames; ++t) {
    const float tn = axis_norm(t, n_frames);
    for (int y = 0; y < height; ++y) {
      const float yn = axis_norm(y, height);
      for (int x = 0; x < width; ++x) {
        g.data[k++] = axis_norm(x, width);
        g.data[k++] = yn;
        g.data[k++] = tn;
      }
    }
  }
  return g;
}

CoordGrid coordinate_grid(int width, int height) {
  if (width < 1 || height < 1)
    throw ContractError("coordinate_grid: dimensions must be >= 1");
  CoordGrid g;
  g.width = width;
  g.height = height;
  g.frames = 1;
  g.dim = 2;
  g.data.resize(g.count() * 2);
  size_t k = 0;
  for (int y = 0; y < height; ++y) {
    const float yn = axis_norm(y, height);
    for (int x = 0; x < width; ++x) {
      g.data[k++] = axis_norm(x, width);
      g.data[k++] = yn;
    }
  }
  return g;
}

}  // namespace wsvc
