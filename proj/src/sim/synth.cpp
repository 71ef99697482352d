#include "sonarfit/sim/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "sonarfit/error.hpp"

namespace sonarfit::sim {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct MotionSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  int class_id = kNoneClass;
  std::vector<Scatterer> scatterers;  // velocities in segment-local time
};

double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

AudioClip render_timeline(const std::vector<MotionSegment>& timeline,
                          const DomainShiftConfig& shift, const SynthOptions& options,
                          std::uint64_t noise_seed) {
  shift.validate();
  require(!timeline.empty(), "render: empty timeline");
  const double duration = timeline.back().end_s;
  require(duration > 0.0, "render: non-positive duration");
  require(duration <= options.max_duration_s,
          "render: duration " + std::to_string(duration) + " s exceeds cap of " +
              std::to_string(options.max_duration_s) + " s");

  const double fs = kSampleRateHz;
  const auto n_total = static_cast<std::size_t>(std::llround(duration * fs));
  std::size_t n_slots = 0;
  for (const auto& seg : timeline) n_slots = std::max(n_slots, seg.scatterers.size());

  // Phase advance per sample for a reflector moving at 1 m/s.
  const double phase_per_mps = 2.0 * kTwoPi * kCarrierHz / (kSpeedOfSoundMps * fs);
  const double tilt_per_hz = std::log(10.0) / 20.0 * shift.attenuation_tilt_db_per_khz / 1000.0;
  const double gain = db_to_amplitude(shift.gain_db);
  const double noise_std = options.carrier_amplitude * db_to_amplitude(shift.noise_floor_db);

  std::mt19937_64 noise_rng(noise_seed);
  std::normal_distribution<double> noise(0.0, noise_std);

  AudioClip clip;
  clip.samples.resize(n_total);
  std::vector<double> slot_phase(n_slots, 0.0);
  std::size_t seg_index = 0;
  for (std::size_t n = 0; n < n_total; ++n) {
    const double t = static_cast<double>(n) / fs;
    while (seg_index + 1 < timeline.size() && t >= timeline[seg_index].end_s) ++seg_index;
    const MotionSegment& seg = timeline[seg_index];
    const double local_t = t - seg.start_s;

    const double carrier_phase =
        kTwoPi * std::fmod(kCarrierHz * static_cast<double>(n), fs) / fs;
    double s = options.carrier_amplitude * std::cos(carrier_phase);
    for (std::size_t j = 0; j < seg.scatterers.size(); ++j) {
      const Scatterer& sc = seg.scatterers[j];
      const double v = shift.speed_scale * sc.velocity_mps(local_t);
      slot_phase[j] += phase_per_mps * v;
      const double tilt = std::exp(tilt_per_hz * doppler_shift_hz(v));
      s += sc.amplitude * tilt * std::cos(carrier_phase + slot_phase[j]);
    }
    if (options.add_noise) s += noise(noise_rng);
    s *= gain;
    clip.samples[n] = static_cast<float>(std::clamp(s, -1.0, 1.0));
  }
  for (const auto& seg : timeline) {
    clip.annotations.push_back({seg.start_s, seg.end_s, seg.class_id});
  }
  return clip;
}

// Velocity of one repetition-structured scatterer: within each repetition the
// first duty*period seconds follow harmonic sinusoids, the remainder is rest.
Scatterer exercise_scatterer(double amplitude, double peak_mps, int harmonic, double phase,
                             double duty, std::shared_ptr<const std::vector<double>> rep_starts) {
  return {amplitude, [=](double t) {
            const auto& starts = *rep_starts;
            auto it = std::upper_bound(starts.begin(), starts.end(), t);
            if (it == starts.begin() || it == starts.end()) return 0.0;
            const double rep_start = *(it - 1);
            const double active = duty * (*it - rep_start);
            const double tau = t - rep_start;
            if (tau >= active) return 0.0;
            return peak_mps * std::sin(kTwoPi * harmonic * tau / active + phase);
          }};
}

MotionSegment exercise_segment(const KinematicProfile& p, double start_s, int n_reps,
                               double jitter, double torso_amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> spread(-jitter, jitter);
  auto starts = std::make_shared<std::vector<double>>();
  double t = 0.0;
  starts->push_back(t);
  for (int r = 0; r < n_reps; ++r) {
    t += p.period_s * (1.0 + spread(rng));
    starts->push_back(t);
  }
  MotionSegment seg;
  seg.start_s = start_s;
  seg.end_s = start_s + t;
  seg.class_id = p.class_id;
  seg.scatterers.push_back(exercise_scatterer(torso_amplitude, p.torso_velocity_mps, 1, 0.0,
                                              p.duty_cycle, starts));
  for (const auto& limb : p.limbs) {
    seg.scatterers.push_back(exercise_scatterer(
        torso_amplitude * limb.relative_amplitude,
        p.torso_velocity_mps * limb.harmonic_multiple, limb.harmonic_multiple,
        limb.phase_rad, p.duty_cycle, starts));
  }
  return seg;
}

// Band-limited random fidgeting: a few slow sinusoids with random rates and
// phases, scaled so the peak never exceeds `peak_mps`.
MotionSegment none_segment(double start_s, double length_s, double peak_mps,
                           double period_s, double torso_amplitude, std::mt19937_64& rng) {
  constexpr int kComponents = 4;
  std::uniform_real_distribution<double> rate(0.2 / period_s, 2.0 / period_s);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::array<double, kComponents> rates{};
  std::array<double, kComponents> phases{};
  for (int m = 0; m < kComponents; ++m) {
    rates[m] = rate(rng);
    phases[m] = phase(rng);
  }
  MotionSegment seg;
  seg.start_s = start_s;
  seg.end_s = start_s + length_s;
  seg.class_id = kNoneClass;
  seg.scatterers.push_back({torso_amplitude, [=](double t) {
                              double v = 0.0;
                              for (int m = 0; m < kComponents; ++m) {
                                v += std::sin(kTwoPi * rates[m] * t + phases[m]);
                              }
                              return peak_mps * v / kComponents;
                            }});
  return seg;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

AudioClip render_scatterers(std::span<const Scatterer> scatterers, double duration_s,
                            const DomainShiftConfig& shift, const SynthOptions& options) {
  require(duration_s > 0.0, "render_scatterers: duration must be positive");
  for (const auto& sc : scatterers) {
    require(static_cast<bool>(sc.velocity_mps), "render_scatterers: missing velocity");
  }
  MotionSegment seg;
  seg.end_s = duration_s;
  seg.scatterers.assign(scatterers.begin(), scatterers.end());
  auto clip = render_timeline({seg}, shift, options, shift.seed);
  clip.annotations.clear();
  return clip;
}

AudioClip synthesize_clip(const KinematicProfile& profile, const DomainShiftConfig& shift,
                          int n_reps, std::uint64_t seed, const SynthOptions& options) {
  profile.validate();
  require(n_reps >= 1, "synthesize_clip: n_reps must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(options.none_gap_min_s, options.none_gap_max_s);

  // Default fidget motion when no explicit none-class profile is supplied.
  constexpr double kNonePeakMps = 0.06;
  constexpr double kNonePeriodS = 2.0;

  std::vector<MotionSegment> timeline;
  double t = 0.0;
  timeline.push_back(none_segment(t, gap(rng), kNonePeakMps, kNonePeriodS,
                                  options.torso_echo_amplitude, rng));
  t = timeline.back().end_s;
  if (profile.class_id == kNoneClass) {
    timeline.push_back(none_segment(t, n_reps * profile.period_s, profile.torso_velocity_mps,
                                    profile.period_s, options.torso_echo_amplitude, rng));
  } else {
    timeline.push_back(exercise_segment(profile, t, n_reps, options.rep_jitter,
                                        options.torso_echo_amplitude, rng));
  }
  t = timeline.back().end_s;
  timeline.push_back(none_segment(t, gap(rng), kNonePeakMps, kNonePeriodS,
                                  options.torso_echo_amplitude, rng));
  return render_timeline(timeline, shift, options, mix_seed(seed, shift.seed));
}

std::vector<AudioClip> build_domain_corpus(std::span<const KinematicProfile> profiles,
                                           const DomainShiftConfig& shift, int sessions,
                                           int reps_per_session, std::uint64_t seed,
                                           const ClipInfo& info, const SynthOptions& options) {
  require(profiles.size() == static_cast<std::size_t>(kNumClasses),
          "build_domain_corpus: expected exactly 9 profiles");
  std::array<const KinematicProfile*, kNumClasses> by_class{};
  for (const auto& p : profiles) {
    p.validate();
    require(by_class[p.class_id] == nullptr,
            "build_domain_corpus: duplicate class_id " + std::to_string(p.class_id));
    by_class[p.class_id] = &p;
  }
  require(sessions >= 0, "build_domain_corpus: negative session count");
  require(reps_per_session >= 1, "build_domain_corpus: reps_per_session must be >= 1");
  shift.validate();

  const KinematicProfile& none = *by_class[kNoneClass];
  std::vector<AudioClip> corpus;
  for (int s = 0; s < sessions; ++s) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> gap(options.none_gap_min_s, options.none_gap_max_s);
    std::vector<MotionSegment> timeline;
    double t = 0.0;
    for (int c = 0; c < kNumExercises; ++c) {
      timeline.push_back(none_segment(t, gap(rng), none.torso_velocity_mps, none.period_s,
                                      options.torso_echo_amplitude, rng));
      t = timeline.back().end_s;
      timeline.push_back(exercise_segment(*by_class[c], t, reps_per_session, options.rep_jitter,
                                          options.torso_echo_amplitude, rng));
      t = timeline.back().end_s;
    }
    timeline.push_back(none_segment(t, gap(rng), none.torso_velocity_mps, none.period_s,
                                    options.torso_echo_amplitude, rng));
    const std::uint64_t noise_seed = mix_seed(mix_seed(seed, shift.seed), 1000003u + s);
    AudioClip clip = render_timeline(timeline, shift, options, noise_seed);
    clip.info = info;
    clip.info.session = s;
    corpus.push_back(std::move(clip));
  }
  return corpus;
}

}  // namespace sonarfit::sim
