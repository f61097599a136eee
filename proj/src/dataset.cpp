#include "petl/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace petl {

const std::vector<std::string>& expression_vocabulary() {
  static const std::vector<std::string> vocab = {"Angry", "Contempt", "Disgust", "Fear",
                                                 "Happy", "Neutral", "Sad", "Surprise"};
  return vocab;
}

int expression_index(const std::string& name) {
  const auto& v = expression_vocabulary();
  const auto it = std::find(v.begin(), v.end(), name);
  if (it == v.end()) throw std::invalid_argument("unknown expression class: " + name);
  return static_cast<int>(it - v.begin());
}

int Dataset::class_index(const std::string& name) const {
  const auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) throw std::invalid_argument("class not in dataset: " + name);
  return static_cast<int>(it - classes.begin());
}

std::vector<std::string> Dataset::subjects() const {
  std::set<std::string> s;
  for (const auto& smp : samples) s.insert(smp.subject_id);
  return {s.begin(), s.end()};
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset load_manifest(const std::string& path, bool check_files) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("manifest: cannot open " + path);
  std::string header;
  if (!std::getline(is, header) || header.rfind("petl-manifest v1 classes=", 0) != 0)
    throw std::runtime_error("manifest: missing or bad header line in " + path);

  Dataset ds;
  ds.classes = split(header.substr(std::string("petl-manifest v1 classes=").size()), ',');
  for (const auto& c : ds.classes) expression_index(c);  // must be in the vocabulary

  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3 + 136)
      throw std::runtime_error("manifest: line " + std::to_string(lineno) + ": expected " +
                               std::to_string(3 + 136) + " fields, got " +
                               std::to_string(fields.size()));
    Sample s;
    s.image_path = (base / fields[0]).string();
    s.subject_id = fields[1];
    s.expression = fields[2];
    if (std::find(ds.classes.begin(), ds.classes.end(), s.expression) == ds.classes.end())
      throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                               ": unknown expression class " + s.expression);
    s.landmarks.resize(68);
    for (int i = 0; i < 68; ++i) {
      try {
        s.landmarks[i].x = std::stof(fields[3 + 2 * i]);
        s.landmarks[i].y = std::stof(fields[3 + 2 * i + 1]);
      } catch (const std::exception&) {
        throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                                 ": bad landmark value");
      }
    }
    if (check_files && !std::filesystem::exists(s.image_path))
      throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                               ": missing image file " + s.image_path);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_manifest(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("manifest: cannot open " + path + " for writing");
  os << "petl-manifest v1 classes=";
  for (std::size_t i = 0; i < ds.classes.size(); ++i)
    os << (i ? "," : "") << ds.classes[i];
  os << "\n";
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (const auto& s : ds.samples) {
    os << std::filesystem::relative(s.image_path, base).string() << "," << s.subject_id
       << "," << s.expression;
    char buf[32];
    for (const auto& p : s.landmarks) {
      std::snprintf(buf, sizeof(buf), ",%.3f,%.3f", p.x, p.y);
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace petl
