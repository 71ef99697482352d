#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sonarfit/data/split.hpp"
#include "sonarfit/harness/config.hpp"
#include "sonarfit/models/baseline.hpp"
#include "sonarfit/models/domain_adaptation.hpp"
#include "sonarfit/models/fewshot.hpp"
#include "sonarfit/nn/checkpoint.hpp"

namespace sonarfit::harness {

/// A model of any method together with the parameters it reads.
class Model {
 public:
  Model(Method method, std::size_t frames, std::size_t bins, std::size_t hidden, std::uint64_t seed);
  /// Rebuilds the architecture recorded in the model card, then restores.
  static std::unique_ptr<Model> from_checkpoint(const nn::Checkpoint& ckpt);

  Method method() const { return method_; }
  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t hidden() const { return hidden_; }
  nn::ParameterSet& params() { return params_; }

  /// Closed-set logits [N, 9] for baseline and DA models.
  nn::Tensor logits(const data::WindowPool& pool, const std::vector<std::size_t>& indices,
                    bool training);
  /// Backbone outputs for DA and few-shot models.
  models::Embedded embed(const data::WindowPool& pool, const std::vector<std::size_t>& indices,
                         bool training);

  models::BaselineModel& baseline() { return baseline_; }
  models::DomainAdaptationModel& da() { return da_; }
  models::FewShotModel& fewshot() { return fewshot_; }

 private:
  Method method_;
  std::size_t frames_, bins_, hidden_;
  nn::ParameterSet params_;
  models::BaselineModel baseline_;
  models::DomainAdaptationModel da_;
  models::FewShotModel fewshot_;
};

struct EpochLog {
  int epoch = 0;        // 1-based
  double loss = 0.0;    // mean training loss over the epoch's steps
  /// DA only: MMD between source and target embeddings of a fixed probe set,
  /// measured in inference mode after the epoch. NaN otherwise.
  double probe_mmd = 0.0;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<EpochLog> history;
};

/// Windows of the DA target pool whose labels are visible: a seeded
/// per-(subject, class) stratified subset of size round(ratio * count).
std::vector<bool> labeled_target_mask(const data::WindowPool& target, double ratio,
                                      std::uint64_t seed);

/// Trains cfg.method from a seeded initialization. Baseline and few-shot
/// methods only read basic_training; DA also reads subject_development as the
/// target domain. Throws ErrorKind::Numeric on a non-finite loss.
TrainResult train(const ExperimentConfig& cfg, const data::DatasetSplit& split,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace sonarfit::harness
