#pragma once

#include <array>
#include <cstdint>

#include "petl/image.hpp"
#include "petl/rng.hpp"
#include "petl/tensor.hpp"

namespace petl {

// Joint geometric transform of a face crop and its landmark coordinates.
struct AffineSpec {
  bool flip = false;
  float rotation_deg = 0;
  float shear_deg = 0;
  float translate_dx = 0;  // fraction of crop width
  float translate_dy = 0;  // fraction of crop height
};

struct AugmentBounds {
  float rotation_max = 15.0f;
  float shear_max = 10.0f;
  float translate_max = 0.1f;
  float flip_prob = 0.5f;
};

// Left/right index map of the 68-point scheme; an involution whose fixed
// points are the midline indices.
std::array<int, 68> symmetry_permutation();

struct AffineResult {
  Tensor image;                   // [H,W,3]
  std::vector<Point2f> landmarks;  // pixel coordinates
  bool in_bounds = true;           // all landmarks within 2 px of the crop
};

// Warps the image about the crop center (bilinear sampling, edge-replicated
// border) and applies the identical affine to the landmark points. A flip
// additionally remaps landmark indices through symmetry_permutation().
AffineResult apply_affine(const Tensor& img, const std::vector<Point2f>& landmarks,
                          const AffineSpec& spec);

AffineSpec random_affine(const AugmentBounds& bounds, Rng& rng);

// apply_affine with the retry contract: if a transformed landmark lands more
// than 2 px outside the crop, the spec magnitudes are halved and the warp is
// retried (up to 3 times); after that the original sample is returned.
AffineResult augment_sample(const Tensor& img, const std::vector<Point2f>& landmarks,
                            const AugmentBounds& bounds, Rng& rng);

}  // namespace petl
