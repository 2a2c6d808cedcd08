#include "wsvc/bitstream.hpp"

#include <zlib.h>

#include <cstdio>
#include <memory>

namespace wsvc {

uint32_t crc32_of(std::span<const uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // crc32 takes uInt lengths; feed in chunks to stay safe on huge inputs.
  size_t off = 0;
  while (off < data.size()) {
    const size_t n = std::min<size_t>(data.size() - off, 1u << 30);
    crc = ::crc32(crc, data.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<uint32_t>(crc);
}

void write_file(const std::string& path, std::span<const uint8_t> data) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"),
                                          std::fclose);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  if (!data.empty() &&
      std::fwrite(data.data(), 1, data.size(), f.get()) != data.size())
    throw IoError("short write to '" + path + "'");
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "rb"),
                                          std::fclose);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::fseek(f.get(), 0, SEEK_END);
  const long sz = std::ftell(f.get());
  if (sz < 0) throw IoError("cannot stat '" + path + "'");
  std::fseek(f.get(), 0, SEEK_SET);
  std::vector<uint8_t> out(static_cast<size_t>(sz));
  if (sz > 0 && std::fread(out.data(), 1, out.size(), f.get()) != out.size())
    throw IoError("short read from '" + path + "'");
  return out;
}

}  // namespace wsvc
