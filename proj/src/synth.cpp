#include "petl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "petl/rng.hpp"

namespace petl {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct ExprParams {
  double brow_raise;   // + raises both brows
  double brow_tilt;    // + pulls the inner brow ends down
  double eye_open;     // half-height of the eye loop
  double mouth_open;   // vertical opening of the lips
  double corner_lift;  // + pulls mouth corners up
  double mouth_halfw;
  double nose_lift;    // + raises the nostril row
};

ExprParams expr_params(const std::string& e) {
  // Every parameter spreads widely across classes so each facial part
  // carries expression signal of its own.
  if (e == "Neutral") return {0, 0, 3.5, 2, 0, 18, 0};
  if (e == "Happy") return {2, 0, 4.0, 6, 8, 24, 2};
  if (e == "Sad") return {-1, -4, 2.8, 2, -7, 16, 1};
  if (e == "Angry") return {-6, 5, 2.2, 1, -4, 16, 4};
  if (e == "Disgust") return {-3, 1, 2.0, 4, -2, 17, 9};
  if (e == "Fear") return {8, -3, 6.0, 8, 0, 15, 5};
  if (e == "Surprise") return {12, 0, 7.5, 16, 0, 14, 12};
  throw std::invalid_argument("synth: no template for expression " + e);
}

}  // namespace

const std::vector<std::string>& synth_classes() {
  static const std::vector<std::string> c = {"Angry", "Disgust", "Fear", "Happy",
                                             "Neutral", "Sad", "Surprise"};
  return c;
}

std::vector<Point2f> synth_template(const std::string& expression) {
  const ExprParams p = expr_params(expression);
  std::vector<Point2f> lm(68);
  auto set = [&lm](int i, double x, double y) {
    lm[i] = {static_cast<float>(x), static_cast<float>(y)};
  };

  // Jaw: lower elliptic arc, left ear to right ear through the chin. The
  // chin drops with an open mouth and the arc width follows the mouth.
  const double jaw_rx = 48.0 + 0.5 * (p.mouth_halfw - 18.0);
  const double jaw_ry = 54.0 + 0.6 * p.mouth_open;
  for (int i = 0; i <= 16; ++i) {
    const double t = kPi * i / 16.0;
    set(i, 80.0 - jaw_rx * std::cos(t), 62.0 + jaw_ry * std::sin(t));
  }

  // Eyebrows with a gentle arch; tilt moves the inner ends.
  const double brow_y = 48.0 - p.brow_raise;
  const double arch[5] = {0, -2, -3, -2, 0};
  for (int k = 0; k < 5; ++k) {
    set(17 + k, 38.0 + 8.0 * k, brow_y + arch[k] + (k == 4 ? p.brow_tilt : 0));
    set(22 + k, 90.0 + 8.0 * k, brow_y + arch[4 - k] + (k == 0 ? p.brow_tilt : 0));
  }

  // Nose bridge and nostril row.
  set(27, 80, 60);
  set(28, 80, 70);
  set(29, 80, 80);
  set(30, 80, 88 - 0.5 * p.nose_lift);
  for (int k = 0; k < 5; ++k) set(31 + k, 68.0 + 6.0 * k, 96.0 - p.nose_lift);

  // Eye loops around (56,60) and (104,60).
  const double o = p.eye_open;
  set(36, 46, 60);
  set(37, 51, 60 - o);
  set(38, 58, 60 - o);
  set(39, 65, 60);
  set(40, 58, 60 + 0.8 * o);
  set(41, 51, 60 + 0.8 * o);
  set(42, 95, 60);
  set(43, 102, 60 - o);
  set(44, 109, 60 - o);
  set(45, 114, 60);
  set(46, 109, 60 + 0.8 * o);
  set(47, 102, 60 + 0.8 * o);

  // Mouth, outer then inner loop, centred at (80,112).
  const double mw = p.mouth_halfw, cl = p.corner_lift, op = p.mouth_open;
  const double yt = 112.0 - 4.0 - op / 2.0, yb = 112.0 + 4.0 + op / 2.0;
  set(48, 80 - mw, 112 - cl);
  set(49, 80 - 0.6 * mw, yt + 1);
  set(50, 80 - 0.25 * mw, yt);
  set(51, 80, yt);
  set(52, 80 + 0.25 * mw, yt);
  set(53, 80 + 0.6 * mw, yt + 1);
  set(54, 80 + mw, 112 - cl);
  set(55, 80 + 0.6 * mw, yb - 1);
  set(56, 80 + 0.25 * mw, yb);
  set(57, 80, yb);
  set(58, 80 - 0.25 * mw, yb);
  set(59, 80 - 0.6 * mw, yb - 1);
  const double yti = 112.0 - op / 2.0, ybi = 112.0 + op / 2.0;
  set(60, 80 - 0.8 * mw, 112 - 0.8 * cl);
  set(61, 80 - 0.3 * mw, yti);
  set(62, 80, yti);
  set(63, 80 + 0.3 * mw, yti);
  set(64, 80 + 0.8 * mw, 112 - 0.8 * cl);
  set(65, 80 + 0.3 * mw, ybi);
  set(66, 80, ybi);
  set(67, 80 - 0.3 * mw, ybi);
  return lm;
}

namespace {

const std::vector<std::vector<int>>& stroke_chains() {
  static const std::vector<std::vector<int>> chains = [] {
    std::vector<std::vector<int>> c;
    auto range = [](int lo, int hi, bool closed) {
      std::vector<int> v;
      for (int i = lo; i <= hi; ++i) v.push_back(i);
      if (closed) v.push_back(lo);
      return v;
    };
    c.push_back(range(0, 16, false));    // jaw
    c.push_back(range(17, 21, false));   // brows
    c.push_back(range(22, 26, false));
    c.push_back(range(27, 30, false));   // nose bridge
    c.push_back(range(31, 35, false));   // nostril row
    c.push_back(range(36, 41, true));    // eyes
    c.push_back(range(42, 47, true));
    c.push_back(range(48, 59, true));    // lips
    c.push_back(range(60, 67, true));
    return c;
  }();
  return chains;
}

void draw_segment(GrayImage& img, Point2f a, Point2f b) {
  const double half = 0.8, feather = 1.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - 2)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + 2)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - 2)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + 2)));
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double t = len2 > 0 ? ((x - a.x) * vx + (y - a.y) * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = x - (a.x + t * vx), dy = y - (a.y + t * vy);
      const double dist = std::sqrt(dx * dx + dy * dy);
      const double w = std::clamp((half + feather - dist) / feather, 0.0, 1.0);
      if (w > 0) {
        const auto v = static_cast<std::uint8_t>(40.0 + 215.0 * w);
        img.at(x, y) = std::max(img.at(x, y), v);
      }
    }
}

}  // namespace

GrayImage render_face(const std::vector<Point2f>& landmarks, std::uint64_t noise_seed) {
  GrayImage img(160, 160);
  Rng rng(noise_seed);
  std::uniform_int_distribution<int> noise(-5, 5);
  // Background texture: two half-wave stripe patterns whose amplitudes track
  // the face centroid, like studio lighting that follows the subject. The
  // global mean response of an oriented filter is proportional to the stripe
  // amplitude, so face placement stays recoverable after spatial pooling.
  double cx = 0, cy = 0;
  for (const auto& p : landmarks) {
    cx += p.x;
    cy += p.y;
  }
  cx /= landmarks.size();
  cy /= landmarks.size();
  const double ax = 25.0 + 1.2 * (cx - 80.0);
  const double ay = 25.0 + 1.2 * (cy - 85.0);
  for (int y = 0; y < 160; ++y)
    for (int x = 0; x < 160; ++x) {
      const double hbar = std::max(0.0, std::sin(2.0 * kPi * x / 8.0));
      const double vbar = std::max(0.0, std::sin(2.0 * kPi * y / 8.0));
      const double v = 30.0 + ax * hbar + ay * vbar + noise(rng);
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  for (const auto& chain : stroke_chains())
    for (std::size_t i = 0; i + 1 < chain.size(); ++i)
      draw_segment(img, landmarks[chain[i]], landmarks[chain[i + 1]]);
  return img;
}

namespace {

// Centroid-subtracted, per-axis RMS-normalized copy. Normalizing each axis
// separately cancels the anisotropic subject scaling, so matching depends on
// the expression configuration only.
std::vector<Point2f> normalize_shape(const std::vector<Point2f>& lm) {
  double mx = 0, my = 0;
  for (const auto& p : lm) {
    mx += p.x;
    my += p.y;
  }
  mx /= lm.size();
  my /= lm.size();
  double rx = 0, ry = 0;
  for (const auto& p : lm) {
    rx += (p.x - mx) * (p.x - mx);
    ry += (p.y - my) * (p.y - my);
  }
  rx = std::sqrt(rx / lm.size());
  ry = std::sqrt(ry / lm.size());
  std::vector<Point2f> out(lm.size());
  for (std::size_t i = 0; i < lm.size(); ++i)
    out[i] = {static_cast<float>((lm[i].x - mx) / rx),
              static_cast<float>((lm[i].y - my) / ry)};
  return out;
}

}  // namespace

std::string nearest_template_label(const std::vector<Point2f>& landmarks) {
  const auto shape = normalize_shape(landmarks);
  std::string best;
  double best_d = 1e30;
  for (const auto& cls : synth_classes()) {
    const auto tpl = normalize_shape(synth_template(cls));
    double d = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      d += (shape[i].x - tpl[i].x) * (shape[i].x - tpl[i].x) +
           (shape[i].y - tpl[i].y) * (shape[i].y - tpl[i].y);
    }
    if (d < best_d) {
      best_d = d;
      best = cls;
    }
  }
  return best;
}

Dataset generate_synthetic(int n_subjects, int per_subject, std::uint64_t seed,
                           const std::string& out_dir) {
  if (n_subjects < 2) throw std::invalid_argument("generate_synthetic: need >= 2 subjects");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir))
    throw std::runtime_error("generate_synthetic: cannot create directory " + out_dir);

  Dataset ds;
  ds.classes = synth_classes();
  Rng master(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.5);

  for (int s = 0; s < n_subjects; ++s) {
    // Subject base geometry: anisotropic scale and a small offset.
    const double sx = 1.0 + 0.1 * uni(master);
    const double sy = 1.0 + 0.1 * uni(master);
    const double ox = 4.0 * uni(master);
    const double oy = 4.0 * uni(master);
    char sid[16];
    std::snprintf(sid, sizeof(sid), "s%02d", s);

    for (int k = 0; k < per_subject; ++k) {
      const std::string& expr = ds.classes[k % ds.classes.size()];
      auto lm = synth_template(expr);
      // Whole-face placement varies per sample; the crop is loose on purpose
      // so localization has something substantial to recover.
      const double dx = 18.0 * uni(master);
      const double dy = 18.0 * uni(master);
      for (auto& p : lm) {
        p.x = static_cast<float>(80.0 + sx * (p.x - 80.0) + ox + dx + jitter(master));
        p.y = static_cast<float>(85.0 + sy * (p.y - 85.0) + oy + dy + jitter(master));
      }
      const std::uint64_t noise_seed = master();
      const GrayImage img = render_face(lm, noise_seed);
      char fname[64];
      std::snprintf(fname, sizeof(fname), "%s_%03d_%s.pgm", sid, k, expr.c_str());
      const std::string path = (std::filesystem::path(out_dir) / fname).string();
      write_pgm(img, path);
      ds.samples.push_back({path, sid, expr, lm});
    }
  }
  save_manifest(ds, (std::filesystem::path(out_dir) / "manifest.txt").string());
  return ds;
}

}  // namespace petl
