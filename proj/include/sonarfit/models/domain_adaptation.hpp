#pragma once

#include <span>
#include <vector>

#include "sonarfit/models/backbone.hpp"
#include "sonarfit/models/mmd.hpp"

namespace sonarfit::models {

inline constexpr std::size_t kDaHeadWidth = 128;

/// Shared ConvNet backbone plus the classifier head dense(E->128) -> leaky
/// ReLU -> dense(128->classes), parameters under "classifier.".
class DomainAdaptationModel {
 public:
  DomainAdaptationModel() = default;
  DomainAdaptationModel(nn::ParameterSet& params, std::size_t frames, std::size_t bins,
                        std::size_t n_classes, nn::Rng& rng);

  ConvBackbone& backbone() { return backbone_; }
  nn::Tensor head(const nn::Tensor& embedding) const;
  nn::Tensor logits(const nn::Tensor& images, bool training);

 private:
  ConvBackbone backbone_;
  nn::Dense dense1_, dense2_;
};

/// Label ratios accepted without the override flag.
bool is_standard_label_ratio(double ratio);
void validate_label_ratio(double ratio, bool allow_free_ratio);

struct DaLossTerms {
  nn::Tensor total;
  nn::Tensor source_ce;
  nn::Tensor target_ce;  // zero when no target label is used
  nn::Tensor mmd;
  std::size_t labeled_targets = 0;
};

struct DaLossOptions {
  double label_ratio = 1.0;
  bool allow_free_ratio = false;
  double mmd_weight = 1.0;
  MmdOptions mmd;
};

/// Source CE + CE over labeled target samples + weight * MMD between the
/// source and target embeddings. Entries of `target_labels` below zero are
/// masked; they only enter the MMD term. Both batches share one backbone pass.
DaLossTerms da_loss(DomainAdaptationModel& model, const nn::Tensor& source_images,
                    std::span<const int> source_labels, const nn::Tensor& target_images,
                    std::span<const int> target_labels, const DaLossOptions& opts);

}  // namespace sonarfit::models
