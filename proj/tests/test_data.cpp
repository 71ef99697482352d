#include <catch_amalgamated.hpp>

#include <map>
#include <set>

#include "sonarfit/data/pool.hpp"
#include "sonarfit/data/sampler.hpp"
#include "sonarfit/data/split.hpp"
#include "sonarfit/error.hpp"

using namespace sonarfit;
using namespace sonarfit::data;

namespace {

dsp::SampleWindow make_window(int label, const std::string& domain, int subject, int session,
                              float tag = 0.0f) {
  dsp::SampleWindow w;
  w.frames = 1;
  w.bins = 1;
  w.values = {tag};
  w.label = label;
  w.domain = domain;
  w.subject = subject;
  w.session = session;
  return w;
}

// `per_class` windows of every class for each (subject, session).
std::vector<dsp::SampleWindow> corpus(const std::string& domain, int subjects, int sessions,
                                      int per_class) {
  std::vector<dsp::SampleWindow> out;
  float tag = 0.0f;
  for (int s = 0; s < subjects; ++s) {
    for (int k = 0; k < sessions; ++k) {
      for (int c = 0; c < sim::kNumClasses; ++c) {
        for (int i = 0; i < per_class; ++i) out.push_back(make_window(c, domain, s, k, tag++));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("split assigns 4 of 8 sessions per subject to development", "[data][split]") {
  const auto split = make_split(corpus("lab", 3, 2, 1), corpus("uncontrolled", 5, 8, 1), 11);
  REQUIRE(split.sessions.size() == 5);
  for (const auto& [subject, a] : split.sessions) {
    CHECK(a.development.size() == 4);
    CHECK(a.testing.size() == 4);
    std::set<int> all(a.development.begin(), a.development.end());
    all.insert(a.testing.begin(), a.testing.end());
    CHECK(all.size() == 8);
  }
  CHECK(split.basic_training.size() == 3 * 2 * 9);
  CHECK(split.subject_development.size() == 5 * 4 * 9);
  CHECK(split.testing.size() == 5 * 4 * 9);
  for (std::size_t i = 0; i < split.basic_training.size(); ++i) {
    CHECK(split.basic_training[i].domain == "lab");
  }

  // Session-level disjointness, checked window by window.
  std::set<std::pair<int, int>> dev_sessions;
  for (std::size_t i = 0; i < split.subject_development.size(); ++i) {
    const auto& w = split.subject_development[i];
    dev_sessions.emplace(w.subject, w.session);
  }
  for (std::size_t i = 0; i < split.testing.size(); ++i) {
    const auto& w = split.testing[i];
    CHECK_FALSE(dev_sessions.contains({w.subject, w.session}));
  }

  const auto again = make_split(corpus("lab", 3, 2, 1), corpus("uncontrolled", 5, 8, 1), 11);
  for (const auto& [subject, a] : split.sessions) {
    CHECK(again.sessions.at(subject).development == a.development);
  }
  bool differs = false;
  for (std::uint64_t seed = 12; seed < 20 && !differs; ++seed) {
    const auto other = make_split({}, corpus("uncontrolled", 5, 8, 1), seed);
    for (const auto& [subject, a] : split.sessions) {
      differs = differs || other.sessions.at(subject).development != a.development;
    }
  }
  CHECK(differs);
}

TEST_CASE("split preconditions", "[data][split]") {
  CHECK_THROWS_AS(make_split(corpus("lab", 1, 1, 1), corpus("uncontrolled", 2, 7, 1), 1), Error);
  CHECK_THROWS_AS(make_split(corpus("lab", 1, 1, 1), corpus("lab", 1, 8, 1), 1), Error);
}

TEST_CASE("split description round trips through JSON", "[data][split]") {
  const auto split = make_split({}, corpus("uncontrolled", 2, 8, 1), 5);
  std::uint64_t seed = 0;
  const auto sessions = sessions_from_json(split_to_json(split), &seed);
  CHECK(seed == 5);
  REQUIRE(sessions.size() == 2);
  for (const auto& [subject, a] : split.sessions) {
    CHECK(sessions.at(subject).development == a.development);
    CHECK(sessions.at(subject).testing == a.testing);
  }
  const auto rebuilt = apply_split({}, corpus("uncontrolled", 2, 8, 1), sessions, seed);
  CHECK(rebuilt.testing.size() == split.testing.size());
}

TEST_CASE("pool indexing", "[data][pool]") {
  const WindowPool pool(corpus("lab", 2, 1, 3));
  CHECK(pool.size() == 2 * 9 * 3);
  CHECK(pool.indices_of(4).size() == 6);
  CHECK(pool.labels_with_at_least(6).size() == 9);
  CHECK(pool.labels_with_at_least(7).empty());
  CHECK(pool.subjects() == std::vector<int>{0, 1});
  const auto one = pool.subject(1);
  CHECK(one.size() == 27);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i].subject == 1);
}

TEST_CASE("class-balanced batches", "[data][sampler]") {
  const WindowPool pool(corpus("lab", 2, 2, 5));
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Batch b = sample_class_balanced_batch(pool, 15, 9, rng);
    REQUIRE(b.indices.size() == 135);
    std::map<int, int> hist;
    for (std::size_t i = 0; i < b.indices.size(); ++i) {
      ++hist[b.labels[i]];
      CHECK(pool[b.indices[i]].label == b.labels[i]);
    }
    CHECK(hist.size() == 9);
    for (const auto& [label, count] : hist) CHECK(count == 15);
    CHECK(std::set<std::size_t>(b.indices.begin(), b.indices.end()).size() == 135);
  }
  const Batch single = sample_class_balanced_batch(pool, 1, 1, rng);
  CHECK(single.indices.size() == 1);
  CHECK(single.labels[0] == 0);

  const WindowPool small(corpus("lab", 1, 2, 5));  // 10 per class
  CHECK_THROWS_AS(sample_class_balanced_batch(small, 15, 9, rng), Error);

  Rng a(8), b(8);
  CHECK(sample_class_balanced_batch(pool, 4, 9, a).indices ==
        sample_class_balanced_batch(pool, 4, 9, b).indices);
}

TEST_CASE("episodes", "[data][sampler]") {
  const WindowPool pool(corpus("lab", 2, 2, 5));  // 20 per class
  Rng rng(6);

  auto verify = [&](std::size_t n, std::size_t k, std::size_t q) {
    const Episode ep = sample_episode(pool, n, k, q, rng);
    CHECK(ep.support.size() == n * k);
    CHECK(ep.query.size() == n * q);
    CHECK(std::set<int>(ep.classes.begin(), ep.classes.end()).size() == n);
    std::set<std::size_t> support_idx;
    std::map<int, std::size_t> s_count, q_count;
    for (const auto& it : ep.support) {
      support_idx.insert(it.index);
      ++s_count[it.label];
      CHECK(pool[it.index].label == ep.classes[it.label]);
    }
    for (const auto& it : ep.query) {
      CHECK_FALSE(support_idx.contains(it.index));
      CHECK(it.label >= 0);
      CHECK(static_cast<std::size_t>(it.label) < n);
      ++q_count[it.label];
      CHECK(pool[it.index].label == ep.classes[it.label]);
    }
    for (const auto& [l, c] : s_count) CHECK(c == k);
    for (const auto& [l, c] : q_count) CHECK(c == q);
  };
  verify(9, 5, 15);
  verify(5, 10, 10);
  verify(1, 1, 1);

  const WindowPool big(corpus("lab", 3, 2, 5));  // 30 per class
  const Episode e = sample_episode(big, 5, 10, 15, rng);
  CHECK(e.support.size() == 50);
  CHECK(e.query.size() == 75);
  CHECK_THROWS_AS(sample_episode(pool, 9, 10, 15, rng), Error);
  CHECK_THROWS_AS(sample_episode(pool, 10, 1, 1, rng), Error);
}
