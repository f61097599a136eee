#include "petl/augment.hpp"

#include <algorithm>
#include <cmath>

namespace petl {

std::array<int, 68> symmetry_permutation() {
  std::array<int, 68> map{};
  for (int i = 0; i < 68; ++i) map[i] = i;
  auto swap_pair = [&map](int a, int b) {
    map[a] = b;
    map[b] = a;
  };
  for (int i = 0; i < 8; ++i) swap_pair(i, 16 - i);           // jaw
  for (int k = 0; k < 5; ++k) swap_pair(17 + k, 26 - k);       // eyebrows
  swap_pair(31, 35);                                           // nose wings
  swap_pair(32, 34);
  swap_pair(36, 45);                                           // eyes
  swap_pair(37, 44);
  swap_pair(38, 43);
  swap_pair(39, 42);
  swap_pair(40, 47);
  swap_pair(41, 46);
  swap_pair(48, 54);                                           // outer mouth
  swap_pair(49, 53);
  swap_pair(50, 52);
  swap_pair(55, 59);
  swap_pair(56, 58);
  swap_pair(60, 64);                                           // inner mouth
  swap_pair(61, 63);
  swap_pair(65, 67);
  return map;
}

namespace {

struct Mat2 {
  double a, b, c, d;  // [[a,b],[c,d]]
  Mat2 inverse() const {
    const double det = a * d - b * c;
    return {d / det, -b / det, -c / det, a / det};
  }
};

constexpr double kPi = 3.14159265358979323846;

}  // namespace

AffineResult apply_affine(const Tensor& img, const std::vector<Point2f>& landmarks,
                          const AffineSpec& spec) {
  const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double th = spec.rotation_deg * kPi / 180.0;
  const double sh = std::tan(spec.shear_deg * kPi / 180.0);
  // rotation composed with shear; flip is handled as a coordinate mirror.
  const Mat2 m{std::cos(th), std::cos(th) * sh - std::sin(th),
               std::sin(th), std::sin(th) * sh + std::cos(th)};
  const double tx = spec.translate_dx * w, ty = spec.translate_dy * h;

  AffineResult out;
  out.image = Tensor({h, w, c});
  const Mat2 mi = m.inverse();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double qx = x - cx - tx, qy = y - cy - ty;
      double sx = mi.a * qx + mi.b * qy + cx;
      double sy = mi.c * qx + mi.d * qy + cy;
      if (spec.flip) sx = (w - 1) - sx;
      sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int ch = 0; ch < c; ++ch) {
        auto px = [&](int xx, int yy) {
          return static_cast<double>(
              img[(static_cast<std::int64_t>(yy) * w + xx) * c + ch]);
        };
        const double v = (1 - fy) * ((1 - fx) * px(x0, y0) + fx * px(x1, y0)) +
                         fy * ((1 - fx) * px(x0, y1) + fx * px(x1, y1));
        out.image[(static_cast<std::int64_t>(y) * w + x) * c + ch] = static_cast<float>(v);
      }
    }

  out.landmarks.resize(landmarks.size());
  const auto perm = symmetry_permutation();
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    double px = landmarks[i].x, py = landmarks[i].y;
    if (spec.flip) px = (w - 1) - px;
    const double dx = px - cx, dy = py - cy;
    const double nx = m.a * dx + m.b * dy + cx + tx;
    const double ny = m.c * dx + m.d * dy + cy + ty;
    const std::size_t j = spec.flip && landmarks.size() == 68 ? static_cast<std::size_t>(perm[i]) : i;
    out.landmarks[j] = {static_cast<float>(nx), static_cast<float>(ny)};
    if (nx < -2.0 || nx > w + 2.0 || ny < -2.0 || ny > h + 2.0) out.in_bounds = false;
  }
  return out;
}

AffineSpec random_affine(const AugmentBounds& bounds, Rng& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_real_distribution<double> prob(0.0, 1.0);
  AffineSpec s;
  s.flip = prob(rng) < bounds.flip_prob;
  s.rotation_deg = static_cast<float>(uni(rng) * bounds.rotation_max);
  s.shear_deg = static_cast<float>(uni(rng) * bounds.shear_max);
  s.translate_dx = static_cast<float>(uni(rng) * bounds.translate_max);
  s.translate_dy = static_cast<float>(uni(rng) * bounds.translate_max);
  return s;
}

AffineResult augment_sample(const Tensor& img, const std::vector<Point2f>& landmarks,
                            const AugmentBounds& bounds, Rng& rng) {
  AffineSpec spec = random_affine(bounds, rng);
  for (int attempt = 0; attempt < 4; ++attempt) {
    AffineResult r = apply_affine(img, landmarks, spec);
    if (r.in_bounds) return r;
    spec.rotation_deg *= 0.5f;
    spec.shear_deg *= 0.5f;
    spec.translate_dx *= 0.5f;
    spec.translate_dy *= 0.5f;
  }
  AffineResult original;
  original.image = img;
  original.landmarks = landmarks;
  return original;
}

}  // namespace petl
