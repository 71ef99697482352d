#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sonarfit/sim/kinematics.hpp"

namespace sonarfit::harness {

enum class Method { Baseline, Da, Siamese, Proto, Local };

std::string to_string(Method m);
Method parse_method(const std::string& name);
bool is_fewshot(Method m);

/// One synthetic recording domain. Every subject draws its own speed scale
/// and gain around the domain values.
struct DomainSpec {
  std::string name;
  int subjects = 0;
  int sessions = 0;
  int reps = 0;
  sim::DomainShiftConfig shift;
  double speed_jitter = 0.0;    // subject speed scale ~ U(scale - j, scale + j)
  double gain_jitter_db = 0.0;  // subject gain ~ U(gain - j, gain)
  double none_gap_min_s = 0.0;
  double none_gap_max_s = 0.0;
  /// Trailing sessions per subject kept out of training as same-domain
  /// held-out data.
  int holdout_sessions = 0;
};

struct DataConfig {
  std::uint64_t seed = 0;
  std::size_t pool_bins = 1;
  DomainSpec lab;
  DomainSpec uncontrolled;
};

struct TrainConfig {
  int epochs = 0;
  int steps_per_epoch = 1;
  double lr = 1e-3;
  double grad_clip = 0.0;      // global gradient norm limit, 0 = off
  std::size_t per_class = 15;  // balanced batch size per class
  std::size_t n_way = 9;
  std::size_t k_shot = 5;
  std::size_t q_query = 15;
  double label_ratio = 1.0;    // DA only
  bool allow_free_ratio = false;
  double mmd_weight = 1.0;
  std::size_t hidden = 128;    // baseline LSTM width
};

struct EvalConfig {
  std::vector<std::size_t> supports{5, 10};
  int iterations = 100;
  bool pooled_supports = false;
};

struct ExperimentConfig {
  Method method = Method::Proto;
  std::uint64_t seed = 0;
  DataConfig data;
  TrainConfig train;
  EvalConfig eval;
  std::string work_dir;

  /// Fully resolved document; unused method-specific keys are null.
  nlohmann::json json;
  /// config_hash of the document without its "paths" section.
  std::string hash() const;
};

/// Defaults for `method`, including its reference training hyperparameters.
nlohmann::json default_config_json(Method method);

/// Applies `key.path=value` overrides. Values parse as JSON when possible
/// and as strings otherwise. Keys absent from `doc` are rejected.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Merges `user` over `base` recursively, rejecting unknown keys.
void merge_config(nlohmann::json& base, const nlohmann::json& user, const std::string& where = "");

/// Validates and decodes a document. Throws ErrorKind::Config.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// default_config_json(method) <- file (if any) <- overrides, then parse.
/// The method comes from the override/file when present, else `method`.
ExperimentConfig resolve_config(Method method, const std::string& config_path,
                                const std::vector<std::string>& overrides);

/// FNV-1a 64 of the compact dump of `doc`, 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

}  // namespace sonarfit::harness
