#pragma once

#include <vector>

#include "sonarfit/data/pool.hpp"

namespace sonarfit::data {

struct Batch {
  std::vector<std::size_t> indices;  // into the sampled pool
  std::vector<int> labels;
};

/// `per_class` windows of each class 0..n_classes-1, drawn without
/// replacement and shuffled.
Batch sample_class_balanced_batch(const WindowPool& pool, std::size_t per_class, int n_classes,
                                  Rng& rng);

struct EpisodeItem {
  std::size_t index = 0;  // into the sampled pool
  int label = 0;          // episode-local, 0..n_way-1
};

struct Episode {
  std::vector<int> classes;  // original label of each episode-local label
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;
};

/// N-way K-shot episode with Q queries per class; classes drawn uniformly
/// without replacement from the pool's label set.
Episode sample_episode(const WindowPool& pool, std::size_t n_way, std::size_t k_shot,
                       std::size_t q_query, Rng& rng);

/// `count` distinct pool indices drawn uniformly from `candidates`.
std::vector<std::size_t> draw_without_replacement(const std::vector<std::size_t>& candidates,
                                                  std::size_t count, Rng& rng);

}  // namespace sonarfit::data
