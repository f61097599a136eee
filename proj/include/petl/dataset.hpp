#pragma once

#include <string>
#include <vector>

#include "petl/image.hpp"

namespace petl {

// Fixed expression vocabulary; class order is canonical, lookups are by name.
const std::vector<std::string>& expression_vocabulary();
int expression_index(const std::string& name);

struct Sample {
  std::string image_path;
  std::string subject_id;
  std::string expression;
  std::vector<Point2f> landmarks;  // 68 points, crop pixel coordinates
};

struct Dataset {
  std::vector<std::string> classes;
  std::vector<Sample> samples;

  int class_index(const std::string& name) const;
  std::vector<std::string> subjects() const;  // unique, ascending
};

// One record per line: image_path,subject_id,expression,136 floats.
// Header line carries the format version and the class vocabulary.
// `check_files` verifies every referenced image exists.
Dataset load_manifest(const std::string& path, bool check_files = true);
void save_manifest(const Dataset& ds, const std::string& path);

}  // namespace petl
