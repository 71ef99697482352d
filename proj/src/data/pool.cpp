#include "sonarfit/data/pool.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "sonarfit/error.hpp"

namespace sonarfit::data {

WindowPool::WindowPool(std::vector<dsp::SampleWindow> windows)
    : store_(std::make_shared<const std::vector<dsp::SampleWindow>>(std::move(windows))) {
  members_.resize(store_->size());
  std::iota(members_.begin(), members_.end(), std::size_t{0});
  index_classes();
}

WindowPool::WindowPool(std::shared_ptr<const std::vector<dsp::SampleWindow>> store,
                       std::vector<std::size_t> members)
    : store_(std::move(store)), members_(std::move(members)) {
  index_classes();
}

void WindowPool::index_classes() {
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const int label = (*store_)[members_[i]].label;
    require(label >= 0 && label < sim::kNumClasses,
            "WindowPool: window label outside 0..8");
    by_class_[label].push_back(i);
  }
}

const std::vector<std::size_t>& WindowPool::indices_of(int label) const {
  require(label >= 0 && label < sim::kNumClasses, "WindowPool: label outside 0..8");
  return by_class_[label];
}

std::vector<int> WindowPool::labels_with_at_least(std::size_t min_count) const {
  std::vector<int> out;
  for (int c = 0; c < sim::kNumClasses; ++c) {
    if (!by_class_[c].empty() && by_class_[c].size() >= min_count) out.push_back(c);
  }
  return out;
}

std::vector<int> WindowPool::subjects() const {
  std::set<int> ids;
  for (std::size_t i = 0; i < size(); ++i) ids.insert((*this)[i].subject);
  return {ids.begin(), ids.end()};
}

WindowPool WindowPool::filter(const std::function<bool(const dsp::SampleWindow&)>& keep) const {
  std::vector<std::size_t> members;
  for (std::size_t m : members_) {
    if (keep((*store_)[m])) members.push_back(m);
  }
  return WindowPool(store_, std::move(members));
}

WindowPool WindowPool::subject(int subject_id) const {
  return filter([subject_id](const dsp::SampleWindow& w) { return w.subject == subject_id; });
}

}  // namespace sonarfit::data
