#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace omniact {

/// 8-bit image, 1 (gray) or 3 (RGB) interleaved channels, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int ch);

  uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

/// Binary PGM (P5) or PPM (P6), 8-bit only. Comments in the header are
/// accepted on read; writes are comment-free.
Image read_pnm(const std::string& path);
void write_pnm(const Image& img, const std::string& path);

}  // namespace omniact
