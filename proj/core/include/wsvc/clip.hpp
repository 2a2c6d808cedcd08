#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsvc/frame.hpp"

namespace wsvc {

enum class ClipFormat : uint8_t { png_sequence, y4m };

struct VideoClip {
  std::vector<FrameBuffer> frames;
  std::string source_id;
  int bit_depth = 8;

  int width() const { return frames.empty() ? 0 : frames[0].width; }
  int height() const { return frames.empty() ? 0 : frames[0].height; }
  int n_frames() const { return static_cast<int>(frames.size()); }
};

// 8-bit RGB PNG in/out; loaded values are exactly k/255.
FrameBuffer load_png(const std::string& path);
void save_png(const FrameBuffer& frame, const std::string& path);

// YUV4MPEG2, C420*/C444 8-bit only, converted to RGB with BT.601
// full-range coefficients and rounded back to the k/255 grid.
std::vector<FrameBuffer> load_y4m(const std::string& path);

// png_sequence: `path` is a directory; frames are its *.png files in
// lexicographic order. y4m: `path` is the file.
VideoClip load_clip(const std::string& path, ClipFormat format);

// Directory -> png_sequence, *.y4m file -> y4m.
VideoClip load_clip_auto(const std::string& path);

// Procedural desk-scale clips. All values are snapped to the k/255 grid so
// PNG round trips are exact.
VideoClip toy_moving_square(int width, int height, int n_frames);
VideoClip toy_ramp_pan(int width, int height, int n_frames);
VideoClip toy_noise(int width, int height, int n_frames, uint64_t seed);
VideoClip toy_static(int width, int height, int n_frames);
FrameBuffer toy_ramp(int width, int height);

}  // namespace wsvc
