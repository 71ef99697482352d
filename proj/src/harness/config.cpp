#include "sonarfit/harness/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sonarfit/data/split.hpp"
#include "sonarfit/error.hpp"
#include "sonarfit/models/domain_adaptation.hpp"

namespace sonarfit::harness {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(ErrorKind::Config, what); }

json domain_json(const std::string& name) {
  const bool lab = name == "lab";
  return {
      {"subjects", lab ? 4 : 5},
      {"sessions", lab ? 3 : 8},
      {"reps", 12},
      {"gain_db", lab ? 0.0 : -20.0},
      {"noise_floor_db", lab ? -70.0 : -38.0},
      {"tilt_db_per_khz", lab ? 0.0 : -9.0},
      {"speed_scale", lab ? 1.0 : 1.0},
      {"speed_jitter", lab ? 0.05 : 0.25},
      {"gain_jitter_db", lab ? 3.0 : 10.0},
      {"none_gap_s", {5.0, 9.0}},
      {"holdout_sessions", lab ? 1 : 0},
  };
}

template <typename T>
T get(const json& doc, const std::string& path) {
  const json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) config_error("missing config key '" + path + "'");
    node = &(*node)[part];
  }
  try {
    return node->get<T>();
  } catch (const json::exception& e) {
    config_error("config key '" + path + "': " + e.what());
  }
}

void check(bool ok, const std::string& what) {
  if (!ok) config_error(what);
}

DomainSpec parse_domain(const json& doc, const std::string& name) {
  const std::string p = "data." + name + ".";
  DomainSpec d;
  d.name = name;
  d.subjects = get<int>(doc, p + "subjects");
  d.sessions = get<int>(doc, p + "sessions");
  d.reps = get<int>(doc, p + "reps");
  d.shift.gain_db = get<double>(doc, p + "gain_db");
  d.shift.noise_floor_db = get<double>(doc, p + "noise_floor_db");
  d.shift.attenuation_tilt_db_per_khz = get<double>(doc, p + "tilt_db_per_khz");
  d.shift.speed_scale = get<double>(doc, p + "speed_scale");
  d.speed_jitter = get<double>(doc, p + "speed_jitter");
  d.gain_jitter_db = get<double>(doc, p + "gain_jitter_db");
  const auto gap = get<std::vector<double>>(doc, p + "none_gap_s");
  check(gap.size() == 2 && gap[0] > 0.0 && gap[0] <= gap[1],
        p + "none_gap_s must be [min, max] with 0 < min <= max");
  d.none_gap_min_s = gap[0];
  d.none_gap_max_s = gap[1];
  d.holdout_sessions = get<int>(doc, p + "holdout_sessions");

  check(d.subjects >= 1, p + "subjects must be >= 1");
  check(d.sessions >= 1, p + "sessions must be >= 1");
  check(d.reps >= 1, p + "reps must be >= 1");
  check(d.holdout_sessions >= 0 && d.holdout_sessions < d.sessions,
        p + "holdout_sessions must lie in [0, sessions)");
  check(d.speed_jitter >= 0.0 && d.gain_jitter_db >= 0.0, p + "jitters must be >= 0");
  // Every subject's draw has to stay inside the simulator's accepted ranges.
  sim::DomainShiftConfig lo = d.shift, hi = d.shift;
  lo.speed_scale -= d.speed_jitter;
  hi.speed_scale += d.speed_jitter;
  lo.gain_db -= d.gain_jitter_db;
  try {
    lo.validate();
    hi.validate();
  } catch (const Error& e) {
    config_error(p + "*: " + e.what());
  }
  return d;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Baseline: return "baseline";
    case Method::Da: return "da";
    case Method::Siamese: return "siamese";
    case Method::Proto: return "proto";
    case Method::Local: return "local";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::Baseline, Method::Da, Method::Siamese, Method::Proto, Method::Local}) {
    if (to_string(m) == name) return m;
  }
  config_error("unknown method '" + name + "' (expected baseline, da, siamese, proto or local)");
}

bool is_fewshot(Method m) {
  return m == Method::Siamese || m == Method::Proto || m == Method::Local;
}

json default_config_json(Method method) {
  json train = {
      {"epochs", 100},
      {"steps_per_epoch", 10},
      {"lr", 1e-3},
      {"grad_clip", 0.0},
      {"per_class", nullptr},
      {"n_way", nullptr},
      {"k_shot", nullptr},
      {"q_query", nullptr},
      {"label_ratio", nullptr},
      {"allow_free_ratio", nullptr},
      {"mmd_weight", nullptr},
      {"hidden", nullptr},
  };
  switch (method) {
    case Method::Baseline:
      train["per_class"] = 15;
      train["hidden"] = 128;
      train["grad_clip"] = 1.0;  // the 129-step recurrence spikes without it
      break;
    case Method::Da:
      train["per_class"] = 15;
      train["label_ratio"] = 1.0;
      train["allow_free_ratio"] = false;
      train["mmd_weight"] = 1.0;
      break;
    case Method::Siamese:
      train["epochs"] = 500;
      train["lr"] = 5e-4;
      train["n_way"] = 9;
      train["k_shot"] = 5;
      train["q_query"] = 15;
      break;
    case Method::Proto:
    case Method::Local:
      train["epochs"] = 500;
      train["n_way"] = 5;
      train["k_shot"] = 10;
      train["q_query"] = 15;
      break;
  }
  return {
      {"method", to_string(method)},
      {"seed", 1},
      {"data",
       {{"seed", 7}, {"pool_bins", 16}, {"lab", domain_json("lab")},
        {"uncontrolled", domain_json("uncontrolled")}}},
      {"train", train},
      {"eval", {{"supports", {5, 10}}, {"iterations", 100}, {"pooled_supports", false}}},
      {"paths", {{"work_dir", "runs"}}},
  };
}

void merge_config(json& base, const json& user, const std::string& where) {
  if (!user.is_object()) config_error("config section '" + where + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) config_error("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_config(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) config_error("override '" + ov + "' is not key=value");
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!node->is_object() || !node->contains(parts[i])) {
        config_error("unknown config key '" + key + "'");
      }
      node = &(*node)[parts[i]];
    }
    if (node->is_object()) {
      merge_config(*node, value, key);
    } else {
      *node = value;
    }
  }
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  c.method = parse_method(get<std::string>(doc, "method"));
  c.seed = get<std::uint64_t>(doc, "seed");
  c.data.seed = get<std::uint64_t>(doc, "data.seed");
  c.data.pool_bins = get<std::size_t>(doc, "data.pool_bins");
  check(c.data.pool_bins >= 1, "data.pool_bins must be >= 1");
  c.data.lab = parse_domain(doc, "lab");
  c.data.uncontrolled = parse_domain(doc, "uncontrolled");
  check(c.data.uncontrolled.sessions >= data::kSessionsPerSubject,
        "data.uncontrolled.sessions must be >= " + std::to_string(data::kSessionsPerSubject));
  check(c.data.uncontrolled.holdout_sessions == 0,
        "data.uncontrolled.holdout_sessions must be 0; the split already holds out test sessions");

  const bool da = c.method == Method::Da;
  const bool fewshot = is_fewshot(c.method);
  auto set_only_for = [&](const char* key, bool applies, const std::string& who) {
    const bool present = !doc.at("train").at(key).is_null();
    if (present && !applies) {
      config_error(std::string("train.") + key + " applies only to " + who + ", not method " +
                   to_string(c.method));
    }
    if (!present && applies) config_error(std::string("train.") + key + " is required");
    return present;
  };

  c.train.epochs = get<int>(doc, "train.epochs");
  c.train.lr = get<double>(doc, "train.lr");
  c.train.grad_clip = get<double>(doc, "train.grad_clip");
  c.train.steps_per_epoch = get<int>(doc, "train.steps_per_epoch");
  check(c.train.epochs >= 0, "train.epochs must be >= 0");
  check(c.train.steps_per_epoch >= 1, "train.steps_per_epoch must be >= 1");
  check(c.train.lr > 0.0, "train.lr must be positive");
  check(c.train.grad_clip >= 0.0, "train.grad_clip must be >= 0");

  if (set_only_for("per_class", !fewshot, "baseline and da")) {
    c.train.per_class = get<std::size_t>(doc, "train.per_class");
    check(c.train.per_class >= 1, "train.per_class must be >= 1");
  }
  const bool ep1 = set_only_for("n_way", fewshot, "few-shot methods");
  const bool ep2 = set_only_for("k_shot", fewshot, "few-shot methods");
  const bool ep3 = set_only_for("q_query", fewshot, "few-shot methods");
  if (ep1 && ep2 && ep3) {
    c.train.n_way = get<std::size_t>(doc, "train.n_way");
    c.train.k_shot = get<std::size_t>(doc, "train.k_shot");
    c.train.q_query = get<std::size_t>(doc, "train.q_query");
    check(c.train.n_way >= 2 && c.train.n_way <= static_cast<std::size_t>(sim::kNumClasses),
          "train.n_way must lie in [2, 9]");
    check(c.train.k_shot >= 1 && c.train.q_query >= 1, "train.k_shot and train.q_query must be >= 1");
  }
  if (set_only_for("label_ratio", da, "da")) {
    c.train.label_ratio = get<double>(doc, "train.label_ratio");
  }
  if (set_only_for("allow_free_ratio", da, "da")) {
    c.train.allow_free_ratio = get<bool>(doc, "train.allow_free_ratio");
  }
  if (set_only_for("mmd_weight", da, "da")) {
    c.train.mmd_weight = get<double>(doc, "train.mmd_weight");
    check(c.train.mmd_weight >= 0.0, "train.mmd_weight must be >= 0");
  }
  if (da) models::validate_label_ratio(c.train.label_ratio, c.train.allow_free_ratio);
  if (set_only_for("hidden", c.method == Method::Baseline, "baseline")) {
    c.train.hidden = get<std::size_t>(doc, "train.hidden");
    check(c.train.hidden >= 1, "train.hidden must be >= 1");
  }

  c.eval.supports = get<std::vector<std::size_t>>(doc, "eval.supports");
  c.eval.iterations = get<int>(doc, "eval.iterations");
  c.eval.pooled_supports = get<bool>(doc, "eval.pooled_supports");
  check(!c.eval.supports.empty(), "eval.supports must not be empty");
  for (std::size_t k : c.eval.supports) check(k >= 1, "eval.supports entries must be >= 1");
  check(c.eval.iterations >= 1, "eval.iterations must be >= 1");

  c.work_dir = get<std::string>(doc, "paths.work_dir");
  c.json = doc;
  return c;
}

ExperimentConfig resolve_config(Method method, const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  json file = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) fail(ErrorKind::Io, "cannot open config file '" + config_path + "'");
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      config_error("config file '" + config_path + "' is not valid JSON: " + e.what());
    }
  }
  if (file.contains("method")) method = parse_method(file.at("method").get<std::string>());
  for (const auto& ov : overrides) {
    if (ov.rfind("method=", 0) == 0) method = parse_method(ov.substr(7));
  }
  json doc = default_config_json(method);
  merge_config(doc, file);
  apply_overrides(doc, overrides);
  return parse_config(doc);
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const {
  // Where artifacts go does not change what they contain.
  nlohmann::json doc = json;
  doc.erase("paths");
  return config_hash(doc);
}

}  // namespace sonarfit::harness
