#include "petl/image.hpp"

#include <fstream>
#include <stdexcept>

namespace petl {

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int read_header_int(std::istream& is, const std::string& path) {
  int c = is.get();
  while (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '#') {
    if (c == '#')
      while (c != '\n' && c != EOF) c = is.get();
    c = is.get();
  }
  if (c < '0' || c > '9') throw std::runtime_error("pgm: malformed header in " + path);
  int v = 0;
  while (c >= '0' && c <= '9') {
    v = v * 10 + (c - '0');
    c = is.get();
  }
  return v;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("pgm: cannot open " + path);
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || m1 != '5') throw std::runtime_error("pgm: not a P5 file: " + path);
  GrayImage img;
  img.width = read_header_int(is, path);
  img.height = read_header_int(is, path);
  const int maxval = read_header_int(is, path);
  if (maxval != 255) throw std::runtime_error("pgm: maxval must be 255 in " + path);
  if (img.width <= 0 || img.height <= 0)
    throw std::runtime_error("pgm: bad dimensions in " + path);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  if (!is.read(reinterpret_cast<char*>(img.pixels.data()),
               static_cast<std::streamsize>(img.pixels.size())))
    throw std::runtime_error("pgm: truncated pixel data in " + path);
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("pgm: cannot open " + path + " for writing");
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw std::runtime_error("pgm: write failed for " + path);
}

void write_ppm(const RgbImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("ppm: cannot open " + path + " for writing");
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw std::runtime_error("ppm: write failed for " + path);
}

}  // namespace petl
