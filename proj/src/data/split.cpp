#include "sonarfit/data/split.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "sonarfit/error.hpp"

namespace sonarfit::data {

using nlohmann::json;

namespace {

std::set<std::string> domains_of(const std::vector<dsp::SampleWindow>& windows) {
  std::set<std::string> out;
  for (const auto& w : windows) out.insert(w.domain);
  return out;
}

}  // namespace

DatasetSplit apply_split(std::vector<dsp::SampleWindow> lab,
                         std::vector<dsp::SampleWindow> uncontrolled,
                         const std::map<int, SessionAssignment>& sessions, std::uint64_t seed) {
  for (const auto& d : domains_of(lab)) {
    require(!domains_of(uncontrolled).contains(d),
            "make_split: domain '" + d + "' appears in both corpora");
  }
  for (const auto& [subject, assignment] : sessions) {
    for (int s : assignment.development) {
      require(std::find(assignment.testing.begin(), assignment.testing.end(), s) ==
                  assignment.testing.end(),
              "make_split: session " + std::to_string(s) + " of subject " +
                  std::to_string(subject) + " assigned to both development and testing");
    }
  }
  DatasetSplit split;
  split.seed = seed;
  split.sessions = sessions;
  split.basic_training = WindowPool(std::move(lab));
  const WindowPool all(std::move(uncontrolled));
  auto in = [&](const dsp::SampleWindow& w, bool development) {
    auto it = sessions.find(w.subject);
    if (it == sessions.end()) return false;
    const auto& list = development ? it->second.development : it->second.testing;
    return std::find(list.begin(), list.end(), w.session) != list.end();
  };
  split.subject_development = all.filter([&](const auto& w) { return in(w, true); });
  split.testing = all.filter([&](const auto& w) { return in(w, false); });
  return split;
}

DatasetSplit make_split(std::vector<dsp::SampleWindow> lab,
                        std::vector<dsp::SampleWindow> uncontrolled, std::uint64_t seed) {
  std::map<int, std::set<int>> sessions_by_subject;
  for (const auto& w : uncontrolled) sessions_by_subject[w.subject].insert(w.session);

  std::map<int, SessionAssignment> assignment;
  for (const auto& [subject, session_set] : sessions_by_subject) {
    if (session_set.size() < static_cast<std::size_t>(kSessionsPerSubject)) {
      fail(ErrorKind::InvalidArgument,
           "make_split: subject " + std::to_string(subject) + " has " +
               std::to_string(session_set.size()) + " sessions, need at least 8");
    }
    std::vector<int> order(session_set.begin(), session_set.end());
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(subject + 1)));
    std::shuffle(order.begin(), order.end(), rng);
    SessionAssignment a;
    a.development.assign(order.begin(), order.begin() + kDevSessions);
    a.testing.assign(order.begin() + kDevSessions, order.end());
    std::sort(a.development.begin(), a.development.end());
    std::sort(a.testing.begin(), a.testing.end());
    assignment[subject] = std::move(a);
  }
  return apply_split(std::move(lab), std::move(uncontrolled), assignment, seed);
}

std::string split_to_json(const DatasetSplit& split) {
  json subjects = json::array();
  for (const auto& [subject, a] : split.sessions) {
    subjects.push_back({{"subject", subject},
                        {"development_sessions", a.development},
                        {"testing_sessions", a.testing},
                        {"development_windows", split.subject_development.subject(subject).size()},
                        {"testing_windows", split.testing.subject(subject).size()}});
  }
  json doc = {{"seed", split.seed},
              {"basic_training_windows", split.basic_training.size()},
              {"subjects", subjects}};
  return doc.dump(2);
}

std::map<int, SessionAssignment> sessions_from_json(const std::string& json_text,
                                                    std::uint64_t* seed) {
  std::map<int, SessionAssignment> out;
  try {
    const json doc = json::parse(json_text);
    if (seed) *seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& s : doc.at("subjects")) {
      SessionAssignment a;
      a.development = s.at("development_sessions").get<std::vector<int>>();
      a.testing = s.at("testing_sessions").get<std::vector<int>>();
      out[s.at("subject").get<int>()] = std::move(a);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, std::string("split description: ") + e.what());
  }
  return out;
}

}  // namespace sonarfit::data
