#include "wsvc/clip.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "wsvc/rng.hpp"

namespace wsvc {

namespace fs = std::filesystem;

VideoClip load_clip(const std::string& path, ClipFormat format) {
  VideoClip clip;
  clip.source_id = path;
  if (format == ClipFormat::y4m) {
    clip.frames = load_y4m(path);
  } else {
    if (!fs::is_directory(path))
      throw IoError("'" + path + "' is not a directory of PNG frames");
    std::vector<std::string> files;
    for (const fs::directory_entry& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".png")
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("'" + path + "' contains no .png files");
    for (const std::string& file : files)
      clip.frames.push_back(load_png(file));
  }
  for (const FrameBuffer& f : clip.frames)
    if (f.width != clip.width() || f.height != clip.height())
      throw IoError("'" + path + "': mixed frame resolutions");
  return clip;
}

VideoClip load_clip_auto(const std::string& path) {
  if (fs::is_directory(path)) return load_clip(path, ClipFormat::png_sequence);
  if (path.size() > 4 && path.substr(path.size() - 4) == ".y4m")
    return load_clip(path, ClipFormat::y4m);
  throw IoError("'" + path + "': expected a PNG directory or a .y4m file");
}

namespace {

// Everything procedural is snapped to the 8-bit grid so PNG fixtures written
// from these clips load back bit-identically.
inline float snap(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return std::round(c * 255.f) / 255.f;
}

}  // namespace

VideoClip toy_moving_square(int width, int height, int n_frames) {
  VideoClip clip;
  clip.source_id = "toy:moving_square";
  const int side = std::max(2, std::min(width, height) / 4);
  for (int t = 0; t < n_frames; ++t) {
    FrameBuffer f(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        f.at(y, x, 0) = snap(0.25f);
        f.at(y, x, 1) = snap(0.25f);
        f.at(y, x, 2) = snap(0.30f);
      }
    const int max_off = std::max(1, width - side - 2);
    const int x0 = 1 + (2 * t) % max_off;
    const int y0 = std::max(1, height / 4);
    for (int y = y0; y < std::min(height, y0 + side); ++y)
      for (int x = x0; x < std::min(width, x0 + side); ++x) {
        f.at(y, x, 0) = snap(0.85f);
        f.at(y, x, 1) = snap(0.70f);
        f.at(y, x, 2) = snap(0.20f);
      }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

VideoClip toy_ramp_pan(int width, int height, int n_frames) {
  VideoClip clip;
  clip.source_id = "toy:ramp_pan";
  for (int t = 0; t < n_frames; ++t) {
    FrameBuffer f(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const float u =
            static_cast<float>((x + t) % width) / static_cast<float>(width - 1);
        f.at(y, x, 0) = snap(u);
        f.at(y, x, 1) = snap(1.f - u);
        f.at(y, x, 2) = snap(0.5f * u + 0.25f);
      }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

VideoClip toy_noise(int width, int height, int n_frames, uint64_t seed) {
  VideoClip clip;
  clip.source_id = "toy:noise";
  Rng rng(seed);
  for (int t = 0; t < n_frames; ++t) {
    FrameBuffer f(width, height);
    for (float& v : f.data) v = snap(rng.uniform_f(0.f, 1.f));
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

VideoClip toy_static(int width, int height, int n_frames) {
  VideoClip clip = toy_moving_square(width, height, 1);
  clip.source_id = "toy:static";
  for (int t = 1; t < n_frames; ++t) clip.frames.push_back(clip.frames[0]);
  return clip;
}

FrameBuffer toy_ramp(int width, int height) {
  FrameBuffer f(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const float u =
          width == 1 ? 0.f
                     : static_cast<float>(x) / static_cast<float>(width - 1);
      f.at(y, x, 0) = snap(u);
      f.at(y, x, 1) = snap(u);
      f.at(y, x, 2) = snap(u);
    }
  return f;
}

}  // namespace wsvc
