#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "sonarfit/nn/tensor.hpp"

namespace sonarfit::nn {

using Rng = std::mt19937_64;

struct ParameterEntry {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Named parameters in registration order. Non-trainable entries hold
/// buffers such as batch-norm running statistics.
class ParameterSet {
 public:
  /// Registers a new entry; duplicate names throw.
  Tensor add(const std::string& name, Array init, bool trainable = true);

  bool contains(const std::string& name) const { return index_.contains(name); }
  Tensor get(const std::string& name) const;
  const std::vector<ParameterEntry>& entries() const { return entries_; }
  std::vector<Tensor> trainable() const;
  std::size_t trainable_count() const;  // scalar count

  void clear_grads();
  /// Names with the given prefix, e.g. "feature.".
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

 private:
  std::vector<ParameterEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

Array normal_init(Shape shape, double stddev, Rng& rng);
Array uniform_init(Shape shape, double bound, Rng& rng);

}  // namespace sonarfit::nn
