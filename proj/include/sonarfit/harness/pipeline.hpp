#pragma once

#include <functional>
#include <map>
#include <vector>

#include "sonarfit/data/split.hpp"
#include "sonarfit/harness/config.hpp"
#include "sonarfit/nn/tensor.hpp"
#include "sonarfit/sim/synth.hpp"

namespace sonarfit::harness {

/// Worker count from SONARFIT_THREADS, else the hardware concurrency.
std::size_t thread_count();

/// Runs fn(0..n-1) on up to thread_count() threads. Callers write results
/// into per-index slots so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Uncontrolled subjects are numbered from 1, lab subjects from 101.
inline constexpr int kLabSubjectBase = 101;

struct SubjectDraw {
  int subject = 0;
  std::uint64_t seed = 0;
  sim::DomainShiftConfig shift;
};

/// Per-subject speed scale and gain around the domain values.
std::vector<SubjectDraw> draw_subjects(const DomainSpec& spec, std::uint64_t data_seed);

/// Every session of every subject of one domain, ordered by subject then
/// session.
std::vector<sim::AudioClip> simulate_domain(const DomainSpec& spec, std::uint64_t data_seed,
                                            std::span<const sim::KinematicProfile> profiles);

/// Sessions of one subject.
std::vector<sim::AudioClip> simulate_subject(const DomainSpec& spec, const SubjectDraw& draw,
                                             std::span<const sim::KinematicProfile> profiles);

/// stft -> slice_windows -> pool_bins -> instance_normalize.
std::vector<dsp::SampleWindow> featurize_clip(const sim::AudioClip& clip, std::size_t pool_bins);

/// featurize_clip over clips, concatenated in clip order.
std::vector<dsp::SampleWindow> featurize(const std::vector<sim::AudioClip>& clips,
                                         std::size_t pool_bins);

/// Simulates and featurizes one subject at a time so that only one
/// subject's audio per worker is held in memory.
std::vector<dsp::SampleWindow> domain_windows(const DomainSpec& spec, std::uint64_t data_seed,
                                              std::span<const sim::KinematicProfile> profiles,
                                              std::size_t pool_bins);

struct PreparedData {
  data::DatasetSplit split;
  /// Lab windows from the held-out trailing sessions.
  data::WindowPool lab_holdout;
};

/// Moves the lab holdout sessions aside, then splits the rest, either
/// afresh or by a previously saved session assignment.
PreparedData split_windows(std::vector<dsp::SampleWindow> lab,
                           std::vector<dsp::SampleWindow> uncontrolled, const DataConfig& cfg,
                           const std::map<int, data::SessionAssignment>* saved = nullptr);

/// Simulate, featurize and split both domains.
PreparedData prepare_data(const DataConfig& cfg);

/// Stacks windows into a constant image batch [N, 1, frames, bins].
nn::Tensor image_batch(const data::WindowPool& pool, const std::vector<std::size_t>& indices);

/// Time-major sequence batch [frames * N, bins]; row t*N + n is frame t of
/// window n.
nn::Tensor sequence_batch(const data::WindowPool& pool, const std::vector<std::size_t>& indices);

}  // namespace sonarfit::harness
