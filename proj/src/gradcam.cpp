#include "petl/gradcam.hpp"

#include <algorithm>
#include <cmath>

namespace petl {

GradCamResult gradcam(Model& model, const Tensor& crop, int class_index) {
  Tensor batch;
  if (crop.ndim() == 3 && crop.dim(0) == kInputSize && crop.dim(1) == kInputSize &&
      crop.dim(2) == 3) {
    batch = Tensor({1, kInputSize, kInputSize, 3});
    batch.data = crop.data;
  } else if (crop.ndim() == 4 && crop.dim(0) == 1 && crop.dim(1) == kInputSize &&
             crop.dim(2) == kInputSize && crop.dim(3) == 3) {
    batch = crop;
  } else {
    throw std::invalid_argument("gradcam: expected a single [160,160,3] crop, got " +
                                crop.shape_str());
  }

  auto& layers = model.extractor().layers();
  Tensor a = batch;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) a = layers[i]->forward(a, false);
  Layer<float>& gap = *layers.back();
  Tensor feat = gap.forward(a, false);
  Tensor logits = model.cls_head().forward(feat, false);

  const int num_classes = model.spec().num_classes;
  int c = class_index;
  if (c < 0) {
    c = 0;
    for (int i = 1; i < num_classes; ++i)
      if (logits[i] > logits[c]) c = i;
  }
  if (c >= num_classes)
    throw std::invalid_argument("gradcam: class index " + std::to_string(c) +
                                " out of range for " + std::to_string(num_classes) + " classes");

  // Gradient of the chosen pre-softmax score, back to the pooled activation.
  Tensor dlogits({1, num_classes});
  dlogits[c] = 1.0f;
  Tensor dfeat = model.cls_head().backward(dlogits);
  Tensor dA = gap.backward(dfeat);

  GradCamResult out;
  out.class_index = c;
  out.alpha = neuron_importance(dA);
  out.map = gradcam_map(a, out.alpha);
  return out;
}

Tensor normalize_map(const Tensor& map) {
  Tensor out = map;
  float mx = 0;
  for (float v : out.data) mx = std::max(mx, v);
  if (mx > 0)
    for (auto& v : out.data) v /= mx;
  return out;
}

Tensor union_maps(const std::vector<Tensor>& maps) {
  if (maps.empty()) throw std::invalid_argument("union_maps: no maps");
  Tensor out = normalize_map(maps.front());
  for (std::size_t i = 1; i < maps.size(); ++i) {
    if (maps[i].shape != out.shape)
      throw std::invalid_argument("union_maps: shape mismatch " + maps[i].shape_str() + " vs " +
                                  out.shape_str());
    Tensor n = normalize_map(maps[i]);
    for (std::int64_t j = 0; j < out.size(); ++j) out[j] = std::max(out[j], n[j]);
  }
  return out;
}

Tensor upsample_map(const Tensor& map, int out_h, int out_w) {
  if (map.ndim() != 2) throw std::invalid_argument("upsample_map: expected [H,W]");
  const int h = map.dim(0), w = map.dim(1);
  Tensor out({out_h, out_w});
  const double sy = static_cast<double>(h) / out_h, sx = static_cast<double>(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * map[y0 * w + x0] + wx * map[y0 * w + x1]) +
                       wy * ((1 - wx) * map[y1 * w + x0] + wx * map[y1 * w + x1]);
      out[static_cast<std::int64_t>(y) * out_w + x] = static_cast<float>(v);
    }
  }
  return out;
}

namespace {

// Piecewise-linear blue -> green -> red ramp over [0,1].
void jet(float v, float& r, float& g, float& b) {
  v = std::clamp(v, 0.0f, 1.0f);
  if (v < 0.5f) {
    b = 1.0f - 2.0f * v;
    g = 2.0f * v;
    r = 0.0f;
  } else {
    b = 0.0f;
    g = 2.0f - 2.0f * v;
    r = 2.0f * v - 1.0f;
  }
}

}  // namespace

RgbImage overlay_heatmap(const GrayImage& base, const Tensor& map, float alpha) {
  const Tensor up = upsample_map(normalize_map(map), base.height, base.width);
  RgbImage out(base.width, base.height);
  for (int y = 0; y < base.height; ++y)
    for (int x = 0; x < base.width; ++x) {
      const float heat = up[static_cast<std::int64_t>(y) * base.width + x];
      const float gray = static_cast<float>(base.at(x, y));
      const std::size_t o = (static_cast<std::size_t>(y) * base.width + x) * 3;
      if (heat <= 0.0f) {
        // No heat, no tint: the overlay degrades to the plain gray image.
        const auto g8 = static_cast<std::uint8_t>(gray);
        out.pixels[o] = out.pixels[o + 1] = out.pixels[o + 2] = g8;
        continue;
      }
      float r, g, b;
      jet(heat, r, g, b);
      auto mix = [&](float ch) {
        return static_cast<std::uint8_t>(
            std::clamp((1.0f - alpha) * gray + alpha * 255.0f * ch + 0.5f, 0.0f, 255.0f));
      };
      out.pixels[o] = mix(r);
      out.pixels[o + 1] = mix(g);
      out.pixels[o + 2] = mix(b);
    }
  return out;
}

}  // namespace petl
