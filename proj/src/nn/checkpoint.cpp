#include "sonarfit/nn/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sonarfit/binary_io.hpp"
#include "sonarfit/error.hpp"

namespace sonarfit::nn {
namespace {
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace

const CheckpointTensor& Checkpoint::at(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  fail(ErrorKind::InvalidArgument, "checkpoint: no tensor named '" + name + "'");
}

Checkpoint snapshot(const ParameterSet& params, nlohmann::json meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  for (const auto& e : params.entries()) {
    CheckpointTensor t;
    t.name = e.name;
    t.shape = e.tensor.shape();
    t.trainable = e.trainable;
    const auto vals = e.tensor.value().values();
    t.values.assign(vals.begin(), vals.end());
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, ParameterSet& params) {
  const auto& entries = params.entries();
  require(entries.size() == ckpt.tensors.size(),
          "restore: checkpoint has " + std::to_string(ckpt.tensors.size()) +
              " tensors, model expects " + std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& src = ckpt.tensors[i];
    const auto& dst = entries[i];
    require(src.name == dst.name, "restore: expected tensor '" + dst.name + "', found '" +
                                      src.name + "'");
    require(src.shape == dst.tensor.shape(), "restore: shape mismatch for '" + src.name + "'");
    Tensor t = dst.tensor;
    Array& v = t.mutable_value();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(src.values[k]);
    t.clear_grad();
  }
}

std::string topology_hash(const Checkpoint& ckpt, const std::string& prefix) {
  std::string desc;
  for (const auto& t : ckpt.tensors) {
    if (!t.name.starts_with(prefix)) continue;
    desc += t.name + shape_string(t.shape) + ';';
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(desc);
  return os.str();
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json index;
  index["meta"] = ckpt.meta;
  index["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    require(t.values.size() == shape_size(t.shape), "checkpoint: value count mismatch for " + t.name);
    index["tensors"].push_back({{"name", t.name},
                                {"shape", t.shape},
                                {"offset", offset},
                                {"count", t.values.size()},
                                {"trainable", t.trainable}});
    offset += t.values.size();
  }
  const std::string text = index.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
  io::write_magic(out, "SFCK");
  io::write_le<std::uint32_t>(out, kVersion);
  io::write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) io::write_f32_array(out, t.values);
  if (!out) fail(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  const std::string what = "checkpoint " + path.string();
  io::expect_magic(in, "SFCK", what);
  const auto version = io::read_le<std::uint32_t>(in, what);
  if (version != kVersion) fail(ErrorKind::Io, what + ": unsupported version " + std::to_string(version));
  const auto len = io::read_le<std::uint64_t>(in, what);
  if (len > (1ull << 30)) fail(ErrorKind::Io, what + ": implausible index size");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorKind::Io, "truncated " + what);
  Checkpoint ckpt;
  try {
    const auto index = nlohmann::json::parse(text);
    ckpt.meta = index.at("meta");
    std::uint64_t expected_offset = 0;
    for (const auto& e : index.at("tensors")) {
      CheckpointTensor t;
      t.name = e.at("name").get<std::string>();
      t.shape = e.at("shape").get<Shape>();
      t.trainable = e.at("trainable").get<bool>();
      const auto count = e.at("count").get<std::uint64_t>();
      if (e.at("offset").get<std::uint64_t>() != expected_offset || count != shape_size(t.shape)) {
        fail(ErrorKind::Io, what + ": inconsistent index entry for " + t.name);
      }
      expected_offset += count;
      t.values.resize(count);
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::Io, what + ": malformed index: " + ex.what());
  }
  for (auto& t : ckpt.tensors) io::read_f32_array(in, t.values, what);
  return ckpt;
}

}  // namespace sonarfit::nn
