#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include "oracles.hpp"
#include "sonarfit/dsp/stft.hpp"
#include "sonarfit/error.hpp"
#include "sonarfit/sim/clip_io.hpp"
#include "sonarfit/sim/kinematics.hpp"
#include "sonarfit/sim/synth.hpp"

using namespace sonarfit;
using namespace sonarfit::sim;

TEST_CASE("doppler shift", "[sim]") {
  CHECK(doppler_shift_hz(17.4) == Catch::Approx(2047.06).margin(0.005));
  CHECK(doppler_shift_hz(0.0) == 0.0);
  CHECK(doppler_shift_hz(0.0306) == Catch::Approx(3.6).margin(1e-9));
  CHECK(doppler_shift_hz(-1.0) < 0.0);
  CHECK(doppler_shift_hz(1.0, 18000.0, 343.0) == Catch::Approx(2.0 * 18000.0 / 343.0));
  CHECK_THROWS_AS(doppler_shift_hz(std::numeric_limits<double>::quiet_NaN()), Error);
  CHECK_THROWS_AS(doppler_shift_hz(std::numeric_limits<double>::infinity()), Error);
  CHECK_THROWS_AS(doppler_shift_hz(1.0, 20000.0, 0.0), Error);
  CHECK_THROWS_AS(doppler_shift_hz(1.0, -5.0), Error);
}

TEST_CASE("doppler shift is linear in velocity", "[sim][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), v = u(rng);
    CHECK(doppler_shift_hz(a * v) == Catch::Approx(a * doppler_shift_hz(v)).epsilon(1e-12));
  }
}

TEST_CASE("shipped profiles are valid and distinguishable", "[sim]") {
  const auto profiles = load_profiles(default_profiles_path());
  REQUIRE(profiles.size() == 9);
  std::set<int> ids;
  std::set<std::tuple<double, double, std::string>> signatures;
  for (const auto& p : profiles) {
    CHECK_NOTHROW(p.validate());
    ids.insert(p.class_id);
    std::string limbs;
    for (const auto& l : p.limbs) {
      limbs += std::to_string(l.harmonic_multiple) + ":" + std::to_string(l.relative_amplitude) + ";";
    }
    signatures.emplace(p.period_s, p.torso_velocity_mps, limbs);
  }
  CHECK(ids.size() == 9);
  CHECK(signatures.size() == 9);
  CHECK(parse_profiles(profiles_to_json(profiles)).size() == 9);
}

TEST_CASE("profile and shift invariants are enforced", "[sim]") {
  KinematicProfile p;
  p.class_id = 0;
  p.period_s = 2.0;
  p.torso_velocity_mps = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p.torso_velocity_mps = 17.5;
  CHECK_THROWS_AS(p.validate(), Error);
  p.torso_velocity_mps = 0.5;
  p.period_s = 0.5;
  CHECK_THROWS_AS(p.validate(), Error);
  p.period_s = 2.0;
  p.duty_cycle = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p.duty_cycle = 1.0;
  CHECK_NOTHROW(p.validate());

  DomainShiftConfig s;
  s.gain_db = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.noise_floor_db = -90.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.speed_scale = 1.4;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK_THROWS_AS(parse_profiles(R"([{"class_id":0,"bogus":1}])"), Error);
}

TEST_CASE("constant 0.5 m/s reflector peaks 58.82 Hz above the carrier", "[sim][oracle]") {
  const auto spec = dsp::stft(oracle::constant_velocity_clip(0.5));
  const double expected_hz = 2.0 * 20000.0 * 0.5 / 340.0;
  REQUIRE(expected_hz == Catch::Approx(58.82).margin(0.005));
  const long peak = oracle::dominant_noncarrier_bin(spec, 2);
  const double peak_hz = spec.bin_center_hz(static_cast<std::size_t>(peak));
  CHECK(std::abs(peak_hz - (20000.0 + expected_hz)) <= spec.grid_spacing_hz);
}

TEST_CASE("stationary scene is a pure carrier", "[sim][oracle]") {
  Scatterer still{0.05, [](double) { return 0.0; }};
  SynthOptions opts;
  opts.add_noise = false;
  const auto clip = render_scatterers(std::span(&still, 1), 1.0, {}, opts);
  const auto spec = dsp::stft(clip);
  REQUIRE(spec.carrier_bin >= 0);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    float peak = -1000.0f;
    std::size_t arg = 0;
    for (std::size_t b = 0; b < spec.bins; ++b) {
      if (spec.at(f, b) > peak) {
        peak = spec.at(f, b);
        arg = b;
      }
    }
    CHECK(std::abs(static_cast<long>(arg) - spec.carrier_bin) <= 1);
    for (std::size_t b = 0; b < spec.bins; ++b) {
      if (std::abs(static_cast<long>(b) - spec.carrier_bin) > 5) CHECK(spec.at(f, b) <= peak - 40.0f);
    }
  }
}

TEST_CASE("second-harmonic limb matches an analytically modulated tone", "[sim][oracle]") {
  // v(t) = A sin(2 pi 2 t / P); its integral is A P / (4 pi) (1 - cos(2 pi 2 t / P)).
  const double A = 0.8, P = 2.0, amp = 0.05, seconds = 4.0;
  Scatterer limb{amp, [=](double t) { return A * std::sin(2.0 * std::numbers::pi * 2.0 * t / P); }};
  SynthOptions opts;
  opts.add_noise = false;
  opts.carrier_amplitude = 0.0;
  const auto clip = render_scatterers(std::span(&limb, 1), seconds, {}, opts);

  const std::size_t n = clip.samples.size();
  std::vector<float> reference(n);
  const double k = 4.0 * std::numbers::pi * 20000.0 / 340.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRateHz;
    const double disp = A * P / (4.0 * std::numbers::pi) * (1.0 - std::cos(2.0 * std::numbers::pi * 2.0 * t / P));
    reference[i] = static_cast<float>(amp * std::cos(2.0 * std::numbers::pi * 20000.0 * t + k * disp));
  }
  const auto got = dsp::stft(clip);
  const auto want = dsp::stft(std::span<const float>(reference));
  REQUIRE(got.frames == want.frames);
  double worst = 0.0;
  for (std::size_t i = 0; i < got.values.size(); ++i) {
    if (want.values[i] > -50.0f) worst = std::max(worst, std::abs(double(got.values[i]) - want.values[i]));
  }
  CHECK(worst < 0.5);

  // The sideband centroid oscillates with period P/2.
  std::vector<double> centroid(got.frames);
  for (std::size_t f = 0; f < got.frames; ++f) {
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < got.bins; ++b) {
      const double p = std::pow(10.0, got.at(f, b) / 10.0);
      num += p * got.bin_center_hz(b);
      den += p;
    }
    centroid[f] = num / den;
  }
  const std::size_t lag = static_cast<std::size_t>(std::lround(P / 2.0 / got.frame_period_s));
  double same = 0.0, half = 0.0;
  const std::size_t half_lag = lag / 2;
  for (std::size_t f = 0; f + lag < got.frames; ++f) {
    same += std::abs(centroid[f + lag] - centroid[f]);
    half += std::abs(centroid[f + half_lag] - centroid[f]);
  }
  CHECK(same < 0.5 * half);
}

TEST_CASE("gain increases in-band energy", "[sim][property]") {
  const auto profiles = load_profiles(default_profiles_path());
  double previous = -1.0;
  for (double gain : {-40.0, -30.0, -20.0, -10.0, 0.0}) {
    DomainShiftConfig shift;
    shift.gain_db = gain;
    shift.seed = 3;
    const auto spec = dsp::stft(synthesize_clip(profiles[2], shift, 2, 11));
    double energy = 0.0;
    for (float v : spec.values) energy += std::pow(10.0, v / 10.0);
    CHECK(energy > previous);
    previous = energy;
  }
}

TEST_CASE("synthesize_clip", "[sim]") {
  const auto profiles = load_profiles(default_profiles_path());
  DomainShiftConfig shift;
  shift.seed = 9;
  const auto a = synthesize_clip(profiles[0], shift, 3, 42);
  const auto b = synthesize_clip(profiles[0], shift, 3, 42);
  CHECK(a.samples == b.samples);
  CHECK(a.annotations == b.annotations);
  const auto c = synthesize_clip(profiles[0], shift, 3, 43);
  CHECK(a.samples != c.samples);

  REQUIRE(a.annotations.size() == 3);
  CHECK(a.annotations[0].class_id == kNoneClass);
  CHECK(a.annotations[1].class_id == 0);
  CHECK(a.annotations[2].class_id == kNoneClass);
  for (std::size_t i = 0; i < a.annotations.size(); ++i) {
    CHECK(a.annotations[i].start_s < a.annotations[i].end_s);
    if (i > 0) CHECK(a.annotations[i].start_s >= a.annotations[i - 1].end_s);
  }
  const double gap0 = a.annotations[0].end_s - a.annotations[0].start_s;
  CHECK(gap0 >= 1.0);
  CHECK(gap0 <= 3.0);
  const auto [lo, hi] = std::minmax_element(a.samples.begin(), a.samples.end());
  CHECK(*lo >= -1.0f);
  CHECK(*hi <= 1.0f);
  CHECK(a.sample_rate_hz == 44100.0);
  CHECK(a.duration_s() == Catch::Approx(a.annotations.back().end_s).margin(1e-4));

  CHECK_THROWS_AS(synthesize_clip(profiles[0], shift, 0, 1), Error);
  SynthOptions tight;
  tight.max_duration_s = 5.0;
  CHECK_THROWS_AS(synthesize_clip(profiles[0], shift, 10, 1, tight), Error);
}

TEST_CASE("build_domain_corpus", "[sim]") {
  const auto profiles = load_profiles(default_profiles_path());
  DomainShiftConfig shift;
  shift.seed = 1;
  const auto corpus = build_domain_corpus(profiles, shift, 2, 10, 77, {3, "lab", 0});
  REQUIRE(corpus.size() == 2);
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& clip = corpus[s];
    CHECK(clip.info.subject == 3);
    CHECK(clip.info.session == static_cast<int>(s));
    std::set<int> seen;
    int exercises = 0;
    for (const auto& seg : clip.annotations) {
      seen.insert(seg.class_id);
      if (seg.class_id != kNoneClass) {
        ++exercises;
        const double reps = (seg.end_s - seg.start_s) / profiles[seg.class_id].period_s;
        CHECK(reps == Catch::Approx(10.0).margin(0.6));
      }
    }
    CHECK(exercises == 8);
    CHECK(seen.size() == 9);
  }
  CHECK(build_domain_corpus(profiles, shift, 0, 10, 77).empty());

  const auto again = build_domain_corpus(profiles, shift, 2, 10, 77, {3, "lab", 0});
  CHECK(again[0].samples == corpus[0].samples);
  CHECK(again[1].samples == corpus[1].samples);

  auto dup = profiles;
  dup[1].class_id = 0;
  CHECK_THROWS_AS(build_domain_corpus(dup, shift, 1, 1, 0), Error);
  CHECK_THROWS_AS(build_domain_corpus(std::span(profiles).first(8), shift, 1, 1, 0), Error);
}

TEST_CASE("clip files round trip", "[sim][io]") {
  const auto profiles = load_profiles(default_profiles_path());
  auto clip = synthesize_clip(profiles[4], {}, 1, 5);
  clip.info = {7, "uncontrolled", 3};
  const auto stem = std::filesystem::temp_directory_path() / "sonarfit_clip_test";
  write_clip(clip, stem);
  CHECK(std::filesystem::file_size(stem.string() + ".sfit") == 16 + 4 * clip.samples.size());
  const auto back = read_clip(stem);
  CHECK(back.samples == clip.samples);
  CHECK(back.annotations == clip.annotations);
  CHECK(back.info == clip.info);
  std::filesystem::remove(stem.string() + ".sfit");
  std::filesystem::remove(stem.string() + ".jsonl");
  CHECK_THROWS_AS(read_clip(stem), Error);
}
