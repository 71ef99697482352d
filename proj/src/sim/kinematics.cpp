#include "sonarfit/sim/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sonarfit/error.hpp"

#ifndef SONARFIT_PROFILES_FILE
#define SONARFIT_PROFILES_FILE "config/profiles.json"
#endif

namespace sonarfit::sim {

using nlohmann::json;

double doppler_shift_hz(double velocity_mps, double carrier_hz,
                        double sound_speed_mps) {
  require(std::isfinite(velocity_mps) && std::isfinite(carrier_hz) &&
              std::isfinite(sound_speed_mps),
          "doppler_shift_hz: non-finite input");
  require(carrier_hz > 0.0, "doppler_shift_hz: carrier must be positive");
  require(sound_speed_mps > 0.0, "doppler_shift_hz: sound speed must be positive");
  return 2.0 * carrier_hz * velocity_mps / sound_speed_mps;
}

double KinematicProfile::peak_velocity_mps() const {
  double peak = torso_velocity_mps;
  for (const auto& limb : limbs) {
    peak = std::max(peak, torso_velocity_mps * limb.harmonic_multiple);
  }
  return peak;
}

void KinematicProfile::validate() const {
  const std::string tag = "profile " + std::to_string(class_id) + ": ";
  require(class_id >= 0 && class_id < kNumClasses, tag + "class_id outside 0..8");
  require(std::isfinite(period_s) && period_s >= 1.0 && period_s <= 6.0,
          tag + "period_s outside [1, 6]");
  require(std::isfinite(torso_velocity_mps) && torso_velocity_mps > 0.0 &&
              torso_velocity_mps <= kMaxSpeedMps,
          tag + "torso_velocity_mps outside (0, 17.4]");
  require(std::isfinite(duty_cycle) && duty_cycle > 0.0 && duty_cycle <= 1.0,
          tag + "duty_cycle outside (0, 1]");
  for (const auto& limb : limbs) {
    require(limb.relative_amplitude >= 0.0 && limb.relative_amplitude <= 1.0,
            tag + "limb relative_amplitude outside [0, 1]");
    require(limb.harmonic_multiple >= 1, tag + "limb harmonic_multiple must be >= 1");
    require(std::isfinite(limb.phase_rad), tag + "limb phase must be finite");
  }
  require(peak_velocity_mps() <= kMaxSpeedMps,
          tag + "limb peak velocity exceeds 17.4 m/s");
}

void DomainShiftConfig::validate() const {
  require(gain_db >= -40.0 && gain_db <= 0.0, "gain_db outside [-40, 0]");
  require(noise_floor_db >= -80.0 && noise_floor_db <= -20.0,
          "noise_floor_db outside [-80, -20]");
  require(speed_scale >= 0.7 && speed_scale <= 1.3, "speed_scale outside [0.7, 1.3]");
  require(std::isfinite(attenuation_tilt_db_per_khz), "attenuation tilt must be finite");
}

std::filesystem::path default_profiles_path() { return SONARFIT_PROFILES_FILE; }

namespace {

KinematicProfile profile_from_json(const json& j) {
  static const std::vector<std::string> known = {
      "class_id", "name", "period_s", "torso_velocity_mps", "limbs", "duty_cycle"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::Config, "unknown profile key '" + key + "'");
    }
  }
  KinematicProfile p;
  p.class_id = j.at("class_id").get<int>();
  p.name = j.value("name", std::string{});
  p.period_s = j.at("period_s").get<double>();
  p.torso_velocity_mps = j.at("torso_velocity_mps").get<double>();
  p.duty_cycle = j.value("duty_cycle", 1.0);
  if (j.contains("limbs")) {
    for (const auto& l : j.at("limbs")) {
      LimbComponent limb;
      limb.relative_amplitude = l.at("relative_amplitude").get<double>();
      limb.harmonic_multiple = l.at("harmonic_multiple").get<int>();
      limb.phase_rad = l.value("phase_rad", 0.0);
      p.limbs.push_back(limb);
    }
  }
  return p;
}

}  // namespace

std::vector<KinematicProfile> parse_profiles(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("profiles: ") + e.what());
  }
  const json& list = doc.is_object() ? doc.at("profiles") : doc;
  std::vector<KinematicProfile> out;
  try {
    for (const auto& item : list) out.push_back(profile_from_json(item));
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("profiles: ") + e.what());
  }
  for (const auto& p : out) p.validate();
  return out;
}

std::vector<KinematicProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open profile file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_profiles(buffer.str());
}

std::string profiles_to_json(const std::vector<KinematicProfile>& profiles) {
  json list = json::array();
  for (const auto& p : profiles) {
    json limbs = json::array();
    for (const auto& l : p.limbs) {
      limbs.push_back({{"relative_amplitude", l.relative_amplitude},
                       {"harmonic_multiple", l.harmonic_multiple},
                       {"phase_rad", l.phase_rad}});
    }
    list.push_back({{"class_id", p.class_id},
                    {"name", p.name},
                    {"period_s", p.period_s},
                    {"torso_velocity_mps", p.torso_velocity_mps},
                    {"limbs", limbs},
                    {"duty_cycle", p.duty_cycle}});
  }
  return json{{"profiles", list}}.dump(2);
}

}  // namespace sonarfit::sim
