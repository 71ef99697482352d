#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sonarfit::sim {

inline constexpr double kSampleRateHz = 44100.0;
inline constexpr double kCarrierHz = 20000.0;
inline constexpr double kSpeedOfSoundMps = 340.0;
// One-sided speed measurable inside the 18-22 kHz emission range.
inline constexpr double kMaxSpeedMps = 17.4;

inline constexpr int kNumExercises = 8;
inline constexpr int kNoneClass = 8;
inline constexpr int kNumClasses = 9;

/// Two-way sonar Doppler shift 2*f0*v/c. Positive v means the reflector
/// approaches the device.
double doppler_shift_hz(double velocity_mps, double carrier_hz = kCarrierHz,
                        double sound_speed_mps = kSpeedOfSoundMps);

/// One limb/arm scatterer riding on the torso motion. `relative_amplitude`
/// is the echo strength relative to the torso echo; the limb oscillates
/// `harmonic_multiple` times per repetition with the same displacement
/// amplitude as the torso, so its peak velocity is torso * harmonic.
struct LimbComponent {
  double relative_amplitude = 0.0;
  int harmonic_multiple = 1;
  double phase_rad = 0.0;
};

struct KinematicProfile {
  int class_id = 0;
  std::string name;
  double period_s = 2.5;
  double torso_velocity_mps = 0.5;
  std::vector<LimbComponent> limbs;
  double duty_cycle = 1.0;

  /// Largest instantaneous scatterer speed the profile can produce at
  /// speed_scale 1.
  double peak_velocity_mps() const;

  /// Throws InvalidArgument on any violated invariant.
  void validate() const;
};

struct DomainShiftConfig {
  double gain_db = 0.0;
  double noise_floor_db = -70.0;
  double attenuation_tilt_db_per_khz = 0.0;
  double speed_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Location of the profile file shipped with the sources.
std::filesystem::path default_profiles_path();

std::vector<KinematicProfile> load_profiles(const std::filesystem::path& path);
std::vector<KinematicProfile> parse_profiles(const std::string& json_text);
std::string profiles_to_json(const std::vector<KinematicProfile>& profiles);

}  // namespace sonarfit::sim
