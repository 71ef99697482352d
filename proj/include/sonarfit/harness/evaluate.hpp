#pragma once

#include <array>
#include <string>
#include <vector>

#include "sonarfit/harness/train.hpp"

namespace sonarfit::harness {

using ConfusionMatrix = std::array<std::array<std::size_t, sim::kNumClasses>, sim::kNumClasses>;

struct SubjectResult {
  int subject = 0;
  double accuracy_pct = 0.0;  // mean over evaluation iterations
  std::size_t n_queries = 0;  // query windows per iteration
};

/// One evaluation of one trained model. k_shot is 0 for closed-set runs and
/// label_ratio is negative when it does not apply.
struct ResultTable {
  std::string method;
  std::size_t k_shot = 0;
  double label_ratio = -1.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<SubjectResult> rows;  // ascending subject
  ConfusionMatrix confusion{};      // [true][predicted], summed over iterations

  /// Unweighted mean of the per-subject accuracies.
  double mean_accuracy() const;
  /// Pooled window-level accuracy from the confusion matrix.
  double pooled_accuracy() const;
};

/// Copies method, seed, label ratio and config hash from `cfg`.
void tag_table(ResultTable& table, const ExperimentConfig& cfg);

/// Predicted class per window, in inference mode and in chunks.
std::vector<int> predict_closed(Model& model, const data::WindowPool& pool);

/// Per-subject window accuracy and confusion of given predictions.
ResultTable score_closed(const data::WindowPool& pool, const std::vector<int>& predictions);

/// score_closed of the model's predictions. Needs a baseline or DA model and
/// a non-empty pool.
ResultTable evaluate_closed(Model& model, const data::WindowPool& pool);

struct FewShotEvalOptions {
  std::size_t k_shot = 5;
  int iterations = 100;
  std::uint64_t seed = 0;
  /// Draw supports from every subject's development windows instead of the
  /// queried subject's own.
  bool pooled_supports = false;
};

/// Each iteration draws k supports per class (all nine classes) from a
/// subject's development windows and classifies all of that subject's test
/// windows. Supports and queries come from disjoint sessions.
ResultTable evaluate_fewshot(Model& model, const data::WindowPool& support_pool,
                             const data::WindowPool& query_pool, const FewShotEvalOptions& opts);

}  // namespace sonarfit::harness
