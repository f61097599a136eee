#include "petl/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace petl {

Tensor replicate_channels(const GrayImage& img) {
  Tensor t({img.height, img.width, 3});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = static_cast<float>(img.pixels[i]);
    t[static_cast<std::int64_t>(i) * 3 + 0] = v;
    t[static_cast<std::int64_t>(i) * 3 + 1] = v;
    t[static_cast<std::int64_t>(i) * 3 + 2] = v;
  }
  return t;
}

GrayImage bilinear_resize(const GrayImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1)
    throw std::invalid_argument("bilinear_resize: output dimensions must be >= 1");
  GrayImage out(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * img.at(x0, y0) + wx * img.at(x1, y0)) +
                       wy * ((1 - wx) * img.at(x0, y1) + wx * img.at(x1, y1));
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

namespace {

// Clipped-histogram CDF mapping for one tile.
std::array<std::uint8_t, 256> tile_lut(const GrayImage& img, int x0, int x1, int y0,
                                       int y1, double clip_limit) {
  std::array<std::int64_t, 256> hist{};
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) ++hist[img.at(x, y)];
  const std::int64_t npix = static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
  const std::int64_t clip =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(clip_limit * npix / 256.0));
  std::int64_t excess = 0;
  for (auto& h : hist) {
    if (h > clip) {
      excess += h - clip;
      h = clip;
    }
  }
  const std::int64_t add = excess / 256, rem = excess % 256;
  for (int b = 0; b < 256; ++b) hist[b] += add + (b < rem ? 1 : 0);
  std::array<std::uint8_t, 256> lut{};
  std::int64_t cdf = 0;
  for (int b = 0; b < 256; ++b) {
    cdf += hist[b];
    lut[b] = static_cast<std::uint8_t>(
        std::clamp(std::floor(255.0 * cdf / npix + 0.5), 0.0, 255.0));
  }
  return lut;
}

}  // namespace

GrayImage clahe(const GrayImage& img, int tiles, double clip_limit) {
  if (img.width < tiles || img.height < tiles)
    throw std::invalid_argument("clahe: image smaller than the tile grid");
  std::vector<int> xb(tiles + 1), yb(tiles + 1);
  for (int i = 0; i <= tiles; ++i) {
    xb[i] = static_cast<int>(static_cast<std::int64_t>(i) * img.width / tiles);
    yb[i] = static_cast<int>(static_cast<std::int64_t>(i) * img.height / tiles);
  }
  std::vector<std::array<std::uint8_t, 256>> luts(static_cast<std::size_t>(tiles) * tiles);
  for (int ty = 0; ty < tiles; ++ty)
    for (int tx = 0; tx < tiles; ++tx)
      luts[static_cast<std::size_t>(ty) * tiles + tx] =
          tile_lut(img, xb[tx], xb[tx + 1], yb[ty], yb[ty + 1], clip_limit);

  // Tile centers; pixels beyond the outermost centers use the edge tiles.
  std::vector<double> cx(tiles), cy(tiles);
  for (int i = 0; i < tiles; ++i) {
    cx[i] = (xb[i] + xb[i + 1] - 1) / 2.0;
    cy[i] = (yb[i] + yb[i + 1] - 1) / 2.0;
  }
  auto locate = [tiles](const std::vector<double>& centers, double p, int& t, double& f) {
    if (p <= centers[0]) {
      t = 0;
      f = 0.0;
    } else if (p >= centers[tiles - 1]) {
      t = tiles - 2;
      f = 1.0;
    } else {
      t = 0;
      while (p > centers[t + 1]) ++t;
      f = (p - centers[t]) / (centers[t + 1] - centers[t]);
    }
  };

  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    int ty;
    double fy;
    locate(cy, y, ty, fy);
    for (int x = 0; x < img.width; ++x) {
      int tx;
      double fx;
      locate(cx, x, tx, fx);
      const std::uint8_t v = img.at(x, y);
      const double v00 = luts[static_cast<std::size_t>(ty) * tiles + tx][v];
      const double v01 = luts[static_cast<std::size_t>(ty) * tiles + tx + 1][v];
      const double v10 = luts[(static_cast<std::size_t>(ty) + 1) * tiles + tx][v];
      const double v11 = luts[(static_cast<std::size_t>(ty) + 1) * tiles + tx + 1][v];
      const double val =
          (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(val + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

GrayImage hist_equalize(const GrayImage& img) {
  std::array<std::int64_t, 256> hist{};
  for (auto p : img.pixels) ++hist[p];
  int distinct = 0;
  for (auto h : hist)
    if (h > 0) ++distinct;
  if (distinct <= 1) return img;
  const std::int64_t n = static_cast<std::int64_t>(img.pixels.size());
  std::array<std::int64_t, 256> cdf{};
  std::int64_t run = 0;
  std::int64_t cdf_min = 0;
  bool have_min = false;
  for (int b = 0; b < 256; ++b) {
    run += hist[b];
    cdf[b] = run;
    if (!have_min && hist[b] > 0) {
      cdf_min = run;
      have_min = true;
    }
  }
  std::array<std::uint8_t, 256> lut{};
  for (int b = 0; b < 256; ++b)
    lut[b] = static_cast<std::uint8_t>(std::clamp(
        std::floor(255.0 * (cdf[b] - cdf_min) / static_cast<double>(n - cdf_min) + 0.5),
        0.0, 255.0));
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = lut[img.pixels[i]];
  return out;
}

GrayImage contrast_stretch(const GrayImage& img, double lo_pct, double hi_pct) {
  std::array<std::int64_t, 256> hist{};
  for (auto p : img.pixels) ++hist[p];
  const std::int64_t n = static_cast<std::int64_t>(img.pixels.size());
  const std::int64_t lo_rank = static_cast<std::int64_t>(std::ceil(lo_pct / 100.0 * n));
  const std::int64_t hi_rank = static_cast<std::int64_t>(std::ceil(hi_pct / 100.0 * n));
  int p_lo = 0, p_hi = 255;
  std::int64_t run = 0;
  bool have_lo = false, have_hi = false;
  for (int b = 0; b < 256; ++b) {
    run += hist[b];
    if (!have_lo && run >= lo_rank) {
      p_lo = b;
      have_lo = true;
    }
    if (!have_hi && run >= hi_rank) {
      p_hi = b;
      have_hi = true;
    }
  }
  if (p_lo >= p_hi) return img;
  std::array<std::uint8_t, 256> lut{};
  for (int b = 0; b < 256; ++b)
    lut[b] = static_cast<std::uint8_t>(std::clamp(
        std::floor(255.0 * (b - p_lo) / static_cast<double>(p_hi - p_lo) + 0.5), 0.0, 255.0));
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = lut[img.pixels[i]];
  return out;
}

Tensor normalize_input(const Tensor& t) {
  Tensor out(t.shape);
  for (std::int64_t i = 0; i < t.size(); ++i) out[i] = t[i] / 127.5f - 1.0f;
  return out;
}

Tensor denormalize_input(const Tensor& t) {
  Tensor out(t.shape);
  for (std::int64_t i = 0; i < t.size(); ++i) out[i] = (t[i] + 1.0f) * 127.5f;
  return out;
}

std::vector<Point2f> normalize_landmarks(const std::vector<Point2f>& points, int crop_w,
                                         int crop_h) {
  std::vector<Point2f> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const float x = points[i].x, y = points[i].y;
    if (x < -2.0f || x > crop_w + 2.0f || y < -2.0f || y > crop_h + 2.0f)
      throw std::out_of_range("normalize_landmarks: point " + std::to_string(i) +
                              " lies more than 2 px outside the crop");
    out[i].x = std::clamp(x, 0.0f, static_cast<float>(crop_w)) / crop_w;
    out[i].y = std::clamp(y, 0.0f, static_cast<float>(crop_h)) / crop_h;
  }
  return out;
}

}  // namespace petl
