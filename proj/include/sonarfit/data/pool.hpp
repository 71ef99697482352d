#pragma once

#include <array>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "sonarfit/dsp/windows.hpp"

namespace sonarfit::data {

using Rng = std::mt19937_64;

/// Immutable view over shared window storage with a per-class index.
class WindowPool {
 public:
  WindowPool() = default;
  explicit WindowPool(std::vector<dsp::SampleWindow> windows);

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  const dsp::SampleWindow& operator[](std::size_t i) const { return (*store_)[members_[i]]; }

  /// Pool-local indices of every window labeled `label`.
  const std::vector<std::size_t>& indices_of(int label) const;
  /// Labels with at least `min_count` windows, ascending.
  std::vector<int> labels_with_at_least(std::size_t min_count) const;
  std::vector<int> subjects() const;

  WindowPool filter(const std::function<bool(const dsp::SampleWindow&)>& keep) const;
  WindowPool subject(int subject_id) const;

 private:
  WindowPool(std::shared_ptr<const std::vector<dsp::SampleWindow>> store,
             std::vector<std::size_t> members);
  void index_classes();

  std::shared_ptr<const std::vector<dsp::SampleWindow>> store_;
  std::vector<std::size_t> members_;
  std::array<std::vector<std::size_t>, sim::kNumClasses> by_class_;
};

}  // namespace sonarfit::data
