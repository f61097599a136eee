#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "petl/model.hpp"

namespace petl {

// Checkpoint layout ("PETL1", little-endian):
//   magic[5] | u32 header_len | header text | u64 fnv1a(header) |
//   u32 tensor_count | { u32 name_len | name | u32 ndim | i32 dims[] |
//                        f32 data[] } ...
// The header is a key = value block describing the architecture and the
// constants baked into training, so a checkpoint is self-describing.

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename V>
V get(std::istream& is, const char* what) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw CheckpointError(std::string("checkpoint: payload-length error reading ") + what);
  return v;
}

}  // namespace detail

inline std::string checkpoint_header(Model& model, const std::string& provenance) {
  const NetworkSpec& spec = model.spec();
  std::ostringstream h;
  h << "format = 1\n";
  h << "kind = " << (spec.kind == NetKind::Baseline ? "baseline"
                     : spec.kind == NetKind::FullTransfer ? "full_transfer" : "part")
    << "\n";
  if (spec.kind == NetKind::Part) h << "feature = " << feature_name(spec.feature) << "\n";
  h << "num_classes = " << spec.num_classes << "\n";
  h << "landmark_outputs = " << spec.landmark_outputs() << "\n";
  h << "input_norm = x/127.5-1\n";
  h << "batchnorm_momentum = " << kBatchNormMomentum << "\n";
  h << "batchnorm_epsilon = " << kBatchNormEpsilon << "\n";
  h << "provenance = " << provenance << "\n";
  return h.str();
}

inline void save_checkpoint(Model& model, const std::string& path,
                            const std::string& provenance = "") {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
  os.write("PETL1", 5);
  const std::string header = checkpoint_header(model, provenance);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put<std::uint64_t>(os, detail::fnv1a(header));
  auto tensors = model.named_tensors();
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (auto& t : tensors) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.tensor->shape.size()));
    for (int d : t.tensor->shape) detail::put<std::int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.tensor->data.data()),
             static_cast<std::streamsize>(t.tensor->data.size() * sizeof(float)));
  }
  if (!os) throw CheckpointError("checkpoint: write failed for " + path);
}

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  std::string provenance;
  std::string header;
};

// Fills `model` from the file; shapes must agree with the model exactly.
inline std::string load_checkpoint_into(Model& model, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + path);
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, "PETL1", 5) != 0)
    throw CheckpointError("checkpoint: bad magic in " + path);
  const auto hlen = detail::get<std::uint32_t>(is, "header length");
  std::string header(hlen, '\0');
  if (!is.read(header.data(), hlen))
    throw CheckpointError("checkpoint: payload-length error reading header");
  const auto stored_hash = detail::get<std::uint64_t>(is, "header hash");
  if (stored_hash != detail::fnv1a(header))
    throw CheckpointError("checkpoint: corrupt header in " + path);
  const auto n_tensors = detail::get<std::uint32_t>(is, "tensor count");
  auto tensors = model.named_tensors();
  if (n_tensors != tensors.size())
    throw CheckpointError("checkpoint: tensor count mismatch (" + std::to_string(n_tensors) +
                          " in file, " + std::to_string(tensors.size()) + " in model)");
  for (auto& t : tensors) {
    const auto nlen = detail::get<std::uint32_t>(is, "tensor name length");
    std::string name(nlen, '\0');
    if (!is.read(name.data(), nlen))
      throw CheckpointError("checkpoint: payload-length error reading tensor name");
    if (name != t.name)
      throw CheckpointError("checkpoint: unexpected tensor " + name + ", wanted " + t.name);
    const auto ndim = detail::get<std::uint32_t>(is, "tensor rank");
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = detail::get<std::int32_t>(is, "tensor dim");
    if (shape != t.tensor->shape)
      throw CheckpointError("checkpoint: shape mismatch for tensor " + name);
    if (!is.read(reinterpret_cast<char*>(t.tensor->data.data()),
                 static_cast<std::streamsize>(t.tensor->data.size() * sizeof(float))))
      throw CheckpointError("checkpoint: payload-length error reading tensor " + name);
  }
  return header;
}

inline std::string header_value(const std::string& header, const std::string& key) {
  std::istringstream is(header);
  std::string line;
  const std::string prefix = key + " = ";
  while (std::getline(is, line))
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  return "";
}

// Builds a model from the header and fills it with the payload.
inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + path);
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, "PETL1", 5) != 0)
    throw CheckpointError("checkpoint: bad magic in " + path);
  const auto hlen = detail::get<std::uint32_t>(is, "header length");
  std::string header(hlen, '\0');
  if (!is.read(header.data(), hlen))
    throw CheckpointError("checkpoint: payload-length error reading header");
  is.close();

  NetworkSpec spec;
  const std::string kind = header_value(header, "kind");
  if (kind == "baseline") spec.kind = NetKind::Baseline;
  else if (kind == "full_transfer") spec.kind = NetKind::FullTransfer;
  else if (kind == "part") spec.kind = NetKind::Part;
  else throw CheckpointError("checkpoint: unknown kind '" + kind + "' in header");
  if (spec.kind == NetKind::Part)
    spec.feature = feature_from_name(header_value(header, "feature"));
  spec.num_classes = std::stoi(header_value(header, "num_classes"));

  LoadedCheckpoint out;
  out.model = std::make_unique<Model>(spec, 0);
  out.header = load_checkpoint_into(*out.model, path);
  out.provenance = header_value(out.header, "provenance");
  return out;
}

}  // namespace petl
