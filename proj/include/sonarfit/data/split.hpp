#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sonarfit/data/pool.hpp"

namespace sonarfit::data {

inline constexpr int kSessionsPerSubject = 8;
inline constexpr int kDevSessions = 4;

struct SessionAssignment {
  std::vector<int> development;  // ascending
  std::vector<int> testing;      // ascending
};

struct DatasetSplit {
  WindowPool basic_training;
  WindowPool subject_development;
  WindowPool testing;
  std::map<int, SessionAssignment> sessions;  // per uncontrolled subject
  std::uint64_t seed = 0;
};

/// Lab windows become basic training; for every uncontrolled subject a seeded
/// shuffle sends 4 sessions to development and the rest to testing.
DatasetSplit make_split(std::vector<dsp::SampleWindow> lab,
                        std::vector<dsp::SampleWindow> uncontrolled, std::uint64_t seed);

/// Rebuilds a split from a persisted session assignment.
DatasetSplit apply_split(std::vector<dsp::SampleWindow> lab,
                         std::vector<dsp::SampleWindow> uncontrolled,
                         const std::map<int, SessionAssignment>& sessions, std::uint64_t seed);

std::string split_to_json(const DatasetSplit& split);
std::map<int, SessionAssignment> sessions_from_json(const std::string& json_text,
                                                    std::uint64_t* seed = nullptr);

}  // namespace sonarfit::data
