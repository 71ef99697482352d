#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sonarfit/nn/parameters.hpp"

namespace sonarfit::nn {

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
  bool trainable = true;
};

/// Named float32 tensors plus free-form metadata (the model card).
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor& at(const std::string& name) const;
};

Checkpoint snapshot(const ParameterSet& params, nlohmann::json meta = nlohmann::json::object());

/// Copies the checkpoint into `params`. Names, order and shapes must match.
void restore(const Checkpoint& ckpt, ParameterSet& params);

/// Hash of the names and shapes of tensors starting with `prefix`.
std::string topology_hash(const Checkpoint& ckpt, const std::string& prefix = "feature.");

// File layout: "SFCK", u32 version, u64 index length, JSON index
// {meta, tensors: [{name, shape, offset, count, trainable}]}, then the
// little-endian float32 payload. Offsets count floats.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace sonarfit::nn
