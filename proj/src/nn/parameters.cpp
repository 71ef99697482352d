#include "sonarfit/nn/parameters.hpp"

#include "sonarfit/error.hpp"

namespace sonarfit::nn {

Tensor ParameterSet::add(const std::string& name, Array init, bool trainable) {
  require(!name.empty(), "ParameterSet: empty parameter name");
  require(!index_.contains(name), "ParameterSet: duplicate parameter '" + name + "'");
  index_[name] = entries_.size();
  entries_.push_back({name, Tensor::leaf(std::move(init), trainable), trainable});
  return entries_.back().tensor;
}

Tensor ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "ParameterSet: unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

std::vector<Tensor> ParameterSet::trainable() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) {
    if (e.trainable) out.push_back(e.tensor);
  }
  return out;
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.tensor.size();
  }
  return n;
}

void ParameterSet::clear_grads() {
  for (auto& e : entries_) e.tensor.clear_grad();
}

std::vector<std::string> ParameterSet::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.name.starts_with(prefix)) out.push_back(e.name);
  }
  return out;
}

Array normal_init(Shape shape, double stddev, Rng& rng) {
  Array a(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : a.values()) v = dist(rng);
  return a;
}

Array uniform_init(Shape shape, double bound, Rng& rng) {
  Array a(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : a.values()) v = dist(rng);
  return a;
}

}  // namespace sonarfit::nn
