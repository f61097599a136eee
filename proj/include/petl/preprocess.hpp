#pragma once

#include <vector>

#include "petl/image.hpp"
#include "petl/tensor.hpp"

namespace petl {

// [H,W,3] with all three channels equal to the gray channel.
Tensor replicate_channels(const GrayImage& img);

// Half-pixel-center ("align_corners = false") bilinear resampling.
GrayImage bilinear_resize(const GrayImage& img, int out_w, int out_h);

// Contrast limited adaptive histogram equalization. `tiles` x `tiles` grid,
// per-tile histograms clipped at clip_limit * tile_pixels / 256 with the
// excess redistributed uniformly, CDFs mapped to [0,255] and pixel values
// bilinearly interpolated between the four surrounding tile mappings.
GrayImage clahe(const GrayImage& img, int tiles = 8, double clip_limit = 2.0);

// Global histogram equalization; single-valued images are returned unchanged.
GrayImage hist_equalize(const GrayImage& img);

// Linear map of [p_lo, p_hi] percentile values onto [0,255] with clamping.
GrayImage contrast_stretch(const GrayImage& img, double lo_pct = 2.0, double hi_pct = 98.0);

// x -> x/127.5 - 1, mapping [0,255] onto [-1,1].
Tensor normalize_input(const Tensor& t);
Tensor denormalize_input(const Tensor& t);

// Pixel coordinates -> [0,1] by crop dimensions. Points up to 2 px outside
// the crop are clamped; beyond that an out-of-bounds error names the point.
std::vector<Point2f> normalize_landmarks(const std::vector<Point2f>& points, int crop_w,
                                         int crop_h);

}  // namespace petl
