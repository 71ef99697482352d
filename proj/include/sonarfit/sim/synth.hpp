#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sonarfit/sim/kinematics.hpp"

namespace sonarfit::sim {

/// Ground-truth annotation, times in seconds from the start of the clip.
struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
  int class_id = kNoneClass;

  bool operator==(const Segment&) const = default;
};

struct ClipInfo {
  int subject = 0;
  std::string domain = "lab";
  int session = 0;

  bool operator==(const ClipInfo&) const = default;
};

struct AudioClip {
  std::vector<float> samples;
  double sample_rate_hz = kSampleRateHz;
  std::vector<Segment> annotations;
  ClipInfo info;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// A point reflector with a prescribed radial velocity v(t).
struct Scatterer {
  double amplitude = 0.0;
  std::function<double(double)> velocity_mps;
};

struct SynthOptions {
  double carrier_amplitude = 0.5;     // direct speaker-to-microphone leak
  double torso_echo_amplitude = 0.05;
  double none_gap_min_s = 1.0;
  double none_gap_max_s = 3.0;
  double rep_jitter = 0.05;           // relative per-repetition period spread
  double max_duration_s = 900.0;
  bool add_noise = true;              // off only for noiseless oracles
};

/// Renders scatterers over `duration_s` by phase integration of their
/// velocities, then applies the domain shift (speed scale, tilt, noise, gain).
AudioClip render_scatterers(std::span<const Scatterer> scatterers, double duration_s,
                            const DomainShiftConfig& shift, const SynthOptions& options = {});

/// One exercise bout of `n_reps` repetitions framed by 1-3 s of none-class
/// motion on both sides.
AudioClip synthesize_clip(const KinematicProfile& profile, const DomainShiftConfig& shift,
                          int n_reps, std::uint64_t seed, const SynthOptions& options = {});

/// One clip per session for a single subject. Each session performs all eight
/// exercises in class order separated by none-class transitions driven by the
/// class-8 profile.
std::vector<AudioClip> build_domain_corpus(std::span<const KinematicProfile> profiles,
                                           const DomainShiftConfig& shift, int sessions,
                                           int reps_per_session, std::uint64_t seed,
                                           const ClipInfo& info = {},
                                           const SynthOptions& options = {});

}  // namespace sonarfit::sim
