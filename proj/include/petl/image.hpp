#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace petl {

struct Point2f {
  float x = 0;
  float y = 0;
};

// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

// 8-bit RGB image, row-major, interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
};

// Binary netpbm IO. PGM is P5 with maxval 255; PPM is P6.
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);
void write_ppm(const RgbImage& img, const std::string& path);

}  // namespace petl
