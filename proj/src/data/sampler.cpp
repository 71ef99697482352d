#include "sonarfit/data/sampler.hpp"

#include <algorithm>

#include "sonarfit/error.hpp"

namespace sonarfit::data {

std::vector<std::size_t> draw_without_replacement(const std::vector<std::size_t>& candidates,
                                                  std::size_t count, Rng& rng) {
  require(count <= candidates.size(), "sampler: not enough candidates to draw from");
  std::vector<std::size_t> pool = candidates;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

Batch sample_class_balanced_batch(const WindowPool& pool, std::size_t per_class, int n_classes,
                                  Rng& rng) {
  require(per_class >= 1, "balanced batch: per_class must be >= 1");
  require(n_classes >= 1 && n_classes <= sim::kNumClasses,
          "balanced batch: n_classes outside 1..9");
  std::vector<std::pair<std::size_t, int>> items;
  for (int c = 0; c < n_classes; ++c) {
    const auto& candidates = pool.indices_of(c);
    if (candidates.size() < per_class) {
      fail(ErrorKind::InvalidArgument,
           "balanced batch: class " + std::to_string(c) + " has " +
               std::to_string(candidates.size()) + " windows, need " + std::to_string(per_class));
    }
    for (std::size_t idx : draw_without_replacement(candidates, per_class, rng)) {
      items.emplace_back(idx, c);
    }
  }
  std::shuffle(items.begin(), items.end(), rng);
  Batch batch;
  for (const auto& [idx, label] : items) {
    batch.indices.push_back(idx);
    batch.labels.push_back(label);
  }
  return batch;
}

Episode sample_episode(const WindowPool& pool, std::size_t n_way, std::size_t k_shot,
                       std::size_t q_query, Rng& rng) {
  require(n_way >= 1 && k_shot >= 1 && q_query >= 1, "episode: n_way, k_shot, q_query must be >= 1");
  std::vector<std::size_t> labels;
  for (int c : pool.labels_with_at_least(1)) labels.push_back(static_cast<std::size_t>(c));
  if (labels.size() < n_way) {
    fail(ErrorKind::InvalidArgument, "episode: pool has " + std::to_string(labels.size()) +
                                         " classes, need " + std::to_string(n_way));
  }
  Episode ep;
  for (std::size_t c : draw_without_replacement(labels, n_way, rng)) {
    ep.classes.push_back(static_cast<int>(c));
  }
  for (std::size_t local = 0; local < n_way; ++local) {
    const auto& candidates = pool.indices_of(ep.classes[local]);
    if (candidates.size() < k_shot + q_query) {
      fail(ErrorKind::InvalidArgument,
           "episode: class " + std::to_string(ep.classes[local]) + " has " +
               std::to_string(candidates.size()) + " windows, need " +
               std::to_string(k_shot + q_query));
    }
    const auto drawn = draw_without_replacement(candidates, k_shot + q_query, rng);
    for (std::size_t i = 0; i < drawn.size(); ++i) {
      EpisodeItem item{drawn[i], static_cast<int>(local)};
      (i < k_shot ? ep.support : ep.query).push_back(item);
    }
  }
  return ep;
}

}  // namespace sonarfit::data
