#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sonarfit::harness {

struct CheckOutcome {
  std::string suite;  // "gradient" or "dsp"
  std::string name;
  double value = 0.0;  // worst observed error
  double threshold = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

struct SelfTestOptions {
  int trials = 20;
  std::uint64_t seed = 1;
  bool gradients = true;
  bool dsp = true;
};

/// Central finite-difference checks of every layer and every model loss in
/// float64. `value` is the worst relative gradient error over `trials`
/// randomized instances.
std::vector<CheckOutcome> gradient_suite(int trials, std::uint64_t seed);

/// Single-check variant; `name` is one of gradient_check_names().
CheckOutcome gradient_check(const std::string& name, int trials, std::uint64_t seed);
std::vector<std::string> gradient_check_names();

/// Synthetic-tone and Doppler-reflector checks of the STFT front end.
std::vector<CheckOutcome> dsp_oracle_suite();

std::vector<CheckOutcome> run_selftest(const SelfTestOptions& opts);

bool all_passed(const std::vector<CheckOutcome>& outcomes);

}  // namespace sonarfit::harness
