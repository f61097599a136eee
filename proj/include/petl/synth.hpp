#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petl/dataset.hpp"
#include "petl/image.hpp"

namespace petl {

// Parametric synthetic faces: per-subject base geometry, per-expression
// landmark templates, seeded jitter, rendered as bright anti-aliased strokes
// so landmarks are recoverable from pixels and the expression is fully
// determined by the landmark configuration.

// The seven synthetic classes (no Contempt).
const std::vector<std::string>& synth_classes();

// Canonical 68-point template for an expression, in 160x160 crop coordinates.
std::vector<Point2f> synth_template(const std::string& expression);

// Renders the landmark chains onto a noisy dark background whose stripe
// texture brightens with the face centroid (see render_face in synth.cpp).
GrayImage render_face(const std::vector<Point2f>& landmarks, std::uint64_t noise_seed);

// Nearest-template classification of a landmark set after centroid/scale
// normalization. This is the label oracle for the generator.
std::string nearest_template_label(const std::vector<Point2f>& landmarks);

// Writes per-sample PGMs plus manifest.txt under out_dir and returns the
// dataset. Classes are balanced per subject.
Dataset generate_synthetic(int n_subjects, int per_subject, std::uint64_t seed,
                           const std::string& out_dir);

}  // namespace petl
