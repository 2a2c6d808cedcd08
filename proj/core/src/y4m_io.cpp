#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "wsvc/clip.hpp"
#include "wsvc/errors.hpp"

namespace wsvc {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};

struct Y4mHeader {
  int width = 0;
  int height = 0;
  bool chroma420 = true;  // else C444
};

Y4mHeader parse_header_line(const std::string& line, const std::string& path) {
  if (line.rfind("YUV4MPEG2", 0) != 0)
    throw IoError("'" + path + "': missing YUV4MPEG2 signature");
  Y4mHeader h;
  bool have_chroma = false;
  size_t pos = 9;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    size_t end = line.find(' ', pos);
    if (end == std::string::npos) end = line.size();
    const std::string tag = line.substr(pos, end - pos);
    pos = end;
    switch (tag[0]) {
      case 'W': h.width = std::stoi(tag.substr(1)); break;
      case 'H': h.height = std::stoi(tag.substr(1)); break;
      case 'C': {
        const std::string c = tag.substr(1);
        if (c.rfind("420", 0) == 0 && c.find("p1") == std::string::npos)
          h.chroma420 = true;
        else if (c == "444")
          h.chroma420 = false;
        else
          throw IoError("'" + path + "': unsupported chroma sampling C" + c +
                        " (only 8-bit C420/C444)");
        have_chroma = true;
        break;
      }
      default: break;  // F/I/A/X tags don't affect decoding here
    }
  }
  if (!have_chroma) h.chroma420 = true;  // y4m default is 420jpeg
  if (h.width < 1 || h.height < 1)
    throw IoError("'" + path + "': missing or invalid W/H tags");
  if (h.chroma420 && (h.width % 2 || h.height % 2))
    throw IoError("'" + path + "': C420 requires even dimensions");
  return h;
}

// BT.601 full-range YCbCr -> 8-bit RGB.
inline uint8_t clamp255(double v) {
  const long r = std::lround(v);
  return static_cast<uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
}

}  // namespace

std::vector<FrameBuffer> load_y4m(const std::string& path) {
  std::unique_ptr<FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open '" + path + "'");

  std::string header;
  for (;;) {
    const int c = std::fgetc(f.get());
    if (c == EOF) throw IoError("'" + path + "': truncated stream header");
    if (c == '\n') break;
    header.push_back(static_cast<char>(c));
    if (header.size() > 512)
      throw IoError("'" + path + "': runaway stream header");
  }
  const Y4mHeader h = parse_header_line(header, path);

  const size_t y_size = static_cast<size_t>(h.width) * h.height;
  const int cw = h.chroma420 ? h.width / 2 : h.width;
  const int ch = h.chroma420 ? h.height / 2 : h.height;
  const size_t c_size = static_cast<size_t>(cw) * ch;
  const size_t frame_bytes = y_size + 2 * c_size;

  std::vector<FrameBuffer> frames;
  std::vector<uint8_t> buf(frame_bytes);
  for (;;) {
    std::string marker;
    int c = std::fgetc(f.get());
    if (c == EOF) break;
    for (; c != EOF && c != '\n'; c = std::fgetc(f.get()))
      marker.push_back(static_cast<char>(c));
    if (marker.rfind("FRAME", 0) != 0)
      throw IoError("'" + path + "': expected FRAME marker, got '" + marker +
                    "'");
    const size_t got = std::fread(buf.data(), 1, frame_bytes, f.get());
    if (got != frame_bytes)
      throw IoError("'" + path + "': truncated frame payload, expected " +
                    std::to_string(frame_bytes) + " bytes, got " +
                    std::to_string(got));
    const uint8_t* yp = buf.data();
    const uint8_t* cbp = yp + y_size;
    const uint8_t* crp = cbp + c_size;
    FrameBuffer frame(h.width, h.height);
    for (int y = 0; y < h.height; ++y)
      for (int x = 0; x < h.width; ++x) {
        const double Y = yp[static_cast<size_t>(y) * h.width + x];
        const size_t ci = h.chroma420
                              ? static_cast<size_t>(y / 2) * cw + x / 2
                              : static_cast<size_t>(y) * cw + x;
        const double cb = static_cast<double>(cbp[ci]) - 128.0;
        const double cr = static_cast<double>(crp[ci]) - 128.0;
        const uint8_t r8 = clamp255(Y + 1.402 * cr);
        const uint8_t g8 = clamp255(Y - 0.344136 * cb - 0.714136 * cr);
        const uint8_t b8 = clamp255(Y + 1.772 * cb);
        frame.at(y, x, 0) = static_cast<float>(r8) / 255.f;
        frame.at(y, x, 1) = static_cast<float>(g8) / 255.f;
        frame.at(y, x, 2) = static_cast<float>(b8) / 255.f;
      }
    frames.push_back(std::move(frame));
  }
  if (frames.empty()) throw IoError("'" + path + "': no frames");
  return frames;
}

}  // namespace wsvc
