#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "sonarfit/error.hpp"
#include "sonarfit/harness/config.hpp"
#include "sonarfit/harness/evaluate.hpp"
#include "sonarfit/harness/pipeline.hpp"
#include "sonarfit/harness/report.hpp"
#include "sonarfit/harness/train.hpp"
#include "sonarfit/nn/ops.hpp"

using namespace sonarfit;
using namespace sonarfit::harness;
using Catch::Matchers::ContainsSubstring;

namespace {

// 48 frames leave three backbone positions, enough local descriptors for k=1.
constexpr std::size_t kT = 48, kB = 16;

bool throws_kind(const std::function<void()>& fn, ErrorKind kind) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

// Class c lights up a short diagonal stripe whose position depends on c.
dsp::SampleWindow window(int label, int subject, int session, const std::string& domain,
                         std::mt19937_64& rng) {
  std::normal_distribution<float> noise(0.0f, 0.3f);
  dsp::SampleWindow w;
  w.frames = kT;
  w.bins = kB;
  w.values.resize(kT * kB);
  for (auto& v : w.values) v = noise(rng);
  for (std::size_t t = 0; t < kT; ++t) w.values[t * kB + (t + 2 * label) % kB] += 3.0f;
  w.label = label;
  w.domain = domain;
  w.subject = subject;
  w.session = session;
  return w;
}

std::vector<dsp::SampleWindow> windows(const std::string& domain, std::vector<int> subjects,
                                       std::vector<int> sessions, int per_class,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<dsp::SampleWindow> out;
  for (int s : subjects)
    for (int sess : sessions)
      for (int c = 0; c < sim::kNumClasses; ++c)
        for (int i = 0; i < per_class; ++i) out.push_back(window(c, s, sess, domain, rng));
  return out;
}

data::DatasetSplit toy_split(int per_class = 3) {
  data::DatasetSplit split;
  split.basic_training = data::WindowPool(windows("lab", {101}, {0, 1}, per_class, 1));
  split.subject_development = data::WindowPool(windows("uncontrolled", {1, 2}, {0, 1}, per_class, 2));
  split.testing = data::WindowPool(windows("uncontrolled", {1, 2}, {2, 3}, per_class, 3));
  return split;
}

ExperimentConfig small_config(Method m, std::vector<std::string> extra = {}) {
  std::vector<std::string> ov = {"train.epochs=1", "train.steps_per_epoch=2"};
  if (m == Method::Baseline) ov.push_back("train.hidden=4");
  if (m == Method::Baseline || m == Method::Da) ov.push_back("train.per_class=2");
  if (is_fewshot(m)) {
    ov.insert(ov.end(), {"train.n_way=3", "train.k_shot=2", "train.q_query=1"});
  }
  ov.insert(ov.end(), extra.begin(), extra.end());
  return resolve_config(m, "", ov);
}

bool same_tensors(const nn::Checkpoint& a, const nn::Checkpoint& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name || a.tensors[i].values != b.tensors[i].values)
      return false;
  }
  return true;
}

struct EnvGuard {
  std::string name;
  explicit EnvGuard(std::string n, const std::string& value) : name(std::move(n)) {
    setenv(name.c_str(), value.c_str(), 1);
  }
  ~EnvGuard() { unsetenv(name.c_str()); }
};

std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("sonarfit_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---- config ---------------------------------------------------------------

TEST_CASE("defaults carry the reference training hyperparameters") {
  const auto proto = resolve_config(Method::Proto, "", {});
  CHECK(proto.train.lr == 1e-3);
  CHECK(proto.train.epochs == 500);
  CHECK(proto.train.n_way == 5);
  CHECK(proto.train.k_shot == 10);
  CHECK(proto.train.q_query == 15);
  const auto local = resolve_config(Method::Local, "", {});
  CHECK(local.train.lr == 1e-3);
  CHECK(local.train.epochs == 500);
  const auto siamese = resolve_config(Method::Siamese, "", {});
  CHECK(siamese.train.lr == 5e-4);
  CHECK(siamese.train.epochs == 500);
  CHECK(siamese.train.n_way == 9);
  CHECK(siamese.train.k_shot == 5);
  CHECK(siamese.train.q_query == 15);
  const auto da = resolve_config(Method::Da, "", {});
  CHECK(da.train.epochs == 100);
  CHECK(da.train.label_ratio == 1.0);
  CHECK(resolve_config(Method::Baseline, "", {}).train.lr == 1e-3);
  CHECK(proto.eval.iterations == 100);
  CHECK(proto.eval.supports == std::vector<std::size_t>{5, 10});
}

TEST_CASE("method-specific keys are validated") {
  CHECK(throws_kind([] { resolve_config(Method::Proto, "", {"train.label_ratio=0.5"}); },
                    ErrorKind::Config));
  CHECK(throws_kind([] { resolve_config(Method::Baseline, "", {"train.n_way=5"}); },
                    ErrorKind::Config));
  CHECK(throws_kind([] { resolve_config(Method::Da, "", {"train.label_ratio=0.7"}); },
                    ErrorKind::Config));
  CHECK(resolve_config(Method::Da, "", {"train.label_ratio=0.7", "train.allow_free_ratio=true"})
            .train.label_ratio == 0.7);
  CHECK(resolve_config(Method::Da, "", {"train.label_ratio=0.5"}).train.label_ratio == 0.5);
  CHECK(throws_kind([] { resolve_config(Method::Proto, "", {"train.grad_clip=-1"}); },
                    ErrorKind::Config));
  CHECK(throws_kind([] { resolve_config(Method::Proto, "", {"eval.iterations=0"}); },
                    ErrorKind::Config));
  CHECK(throws_kind([] { resolve_config(Method::Proto, "", {"train.bogus=1"}); }, ErrorKind::Config));
  CHECK(throws_kind([] { resolve_config(Method::Proto, "", {"noequals"}); }, ErrorKind::Config));
  CHECK(throws_kind([] { resolve_config(Method::Proto, "", {"method=knn"}); }, ErrorKind::Config));
  CHECK(throws_kind([] { resolve_config(Method::Proto, "", {"data.uncontrolled.sessions=6"}); },
                    ErrorKind::Config));
  CHECK(throws_kind([] { resolve_config(Method::Proto, "", {"data.uncontrolled.speed_jitter=0.5"}); },
                    ErrorKind::Config));
}

TEST_CASE("config files merge under overrides and the method follows the document") {
  const auto dir = temp_dir("cfg");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"method": "siamese", "train": {"epochs": 7}, "data": {"lab": {"reps": 3}}})";
  }
  const auto cfg = resolve_config(Method::Proto, (dir / "c.json").string(), {"train.epochs=9"});
  CHECK(cfg.method == Method::Siamese);
  CHECK(cfg.train.epochs == 9);
  CHECK(cfg.data.lab.reps == 3);
  CHECK(cfg.train.lr == 5e-4);
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"train": {"epoch": 7}})";
  }
  CHECK(throws_kind([&] { resolve_config(Method::Proto, (dir / "bad.json").string(), {}); },
                    ErrorKind::Config));
  CHECK(throws_kind([&] { resolve_config(Method::Proto, (dir / "none.json").string(), {}); },
                    ErrorKind::Io));
  std::filesystem::remove_all(dir);
}

TEST_CASE("config hash is stable and sensitive") {
  const auto a = resolve_config(Method::Proto, "", {});
  const auto b = resolve_config(Method::Proto, "", {});
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  CHECK(resolve_config(Method::Proto, "", {"seed=2"}).hash() != a.hash());
  const auto moved = resolve_config(Method::Proto, "", {"paths.work_dir=elsewhere"});
  CHECK(moved.json["paths"]["work_dir"] == "elsewhere");
  CHECK(moved.hash() == a.hash());
}

// ---- pipeline -------------------------------------------------------------

TEST_CASE("thread count comes from the environment") {
  {
    EnvGuard env("SONARFIT_THREADS", "3");
    CHECK(thread_count() == 3);
  }
  {
    EnvGuard env("SONARFIT_THREADS", "zero");
    CHECK(throws_kind([] { thread_count(); }, ErrorKind::Config));
  }
  CHECK(thread_count() >= 1);
}

TEST_CASE("parallel_for fills every slot and forwards errors") {
  EnvGuard env("SONARFIT_THREADS", "4");
  std::vector<int> out(100, -1);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("subject draws stay inside the domain ranges and are seeded") {
  const auto cfg = resolve_config(Method::Proto, "", {});
  const auto a = draw_subjects(cfg.data.uncontrolled, 11);
  const auto b = draw_subjects(cfg.data.uncontrolled, 11);
  const auto c = draw_subjects(cfg.data.uncontrolled, 12);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].subject == static_cast<int>(i) + 1);
    CHECK(a[i].shift.speed_scale == b[i].shift.speed_scale);
    CHECK(a[i].shift.speed_scale != c[i].shift.speed_scale);
    CHECK(std::abs(a[i].shift.speed_scale - cfg.data.uncontrolled.shift.speed_scale) <=
          cfg.data.uncontrolled.speed_jitter);
    CHECK(a[i].shift.gain_db <= cfg.data.uncontrolled.shift.gain_db);
    CHECK_NOTHROW(a[i].shift.validate());
  }
  CHECK(draw_subjects(cfg.data.lab, 11).front().subject == kLabSubjectBase);
}

TEST_CASE("domain windows are identical across thread counts") {
  auto cfg = resolve_config(
      Method::Proto, "",
      {"data.lab.subjects=2", "data.lab.sessions=1", "data.lab.reps=1", "data.lab.holdout_sessions=0",
       "data.lab.none_gap_s=[5,6]"});
  const auto profiles = sim::load_profiles(sim::default_profiles_path());
  std::vector<dsp::SampleWindow> one, two;
  {
    EnvGuard env("SONARFIT_THREADS", "1");
    one = domain_windows(cfg.data.lab, 3, profiles, 16);
  }
  {
    EnvGuard env("SONARFIT_THREADS", "2");
    two = domain_windows(cfg.data.lab, 3, profiles, 16);
  }
  REQUIRE(one.size() == two.size());
  REQUIRE(!one.empty());
  std::set<int> subjects;
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].values == two[i].values);
    CHECK(one[i].subject == two[i].subject);
    CHECK(one[i].bins == 24);
    CHECK(one[i].frames == dsp::kWindowFrames);
    subjects.insert(one[i].subject);
  }
  CHECK(subjects == std::set<int>{101, 102});
}

TEST_CASE("split keeps lab holdout sessions and development/testing apart") {
  auto cfg = resolve_config(Method::Proto, "", {});
  auto lab = windows("lab", {101, 102}, {0, 1, 2}, 1, 4);
  auto unc = windows("uncontrolled", {1, 2, 3}, {0, 1, 2, 3, 4, 5, 6, 7}, 1, 5);
  const auto data = split_windows(lab, unc, cfg.data);
  for (std::size_t i = 0; i < data.lab_holdout.size(); ++i) CHECK(data.lab_holdout[i].session == 2);
  for (std::size_t i = 0; i < data.split.basic_training.size(); ++i)
    CHECK(data.split.basic_training[i].session < 2);
  CHECK(data.lab_holdout.size() + data.split.basic_training.size() == lab.size());
  for (int s : {1, 2, 3}) {
    std::set<int> dev, test;
    const auto d = data.split.subject_development.subject(s);
    const auto t = data.split.testing.subject(s);
    for (std::size_t i = 0; i < d.size(); ++i) dev.insert(d[i].session);
    for (std::size_t i = 0; i < t.size(); ++i) test.insert(t[i].session);
    CHECK(dev.size() == 4);
    CHECK(test.size() == 4);
    for (int x : dev) CHECK(!test.contains(x));
  }
  const auto again = split_windows(lab, unc, cfg.data, &data.split.sessions);
  CHECK(again.split.testing.size() == data.split.testing.size());
}

TEST_CASE("batch builders lay windows out as images and time-major sequences") {
  auto ws = windows("lab", {101}, {0}, 1, 6);
  const data::WindowPool pool(ws);
  const std::vector<std::size_t> idx = {3, 0};
  const auto img = image_batch(pool, idx);
  REQUIRE(img.shape() == nn::Shape{2, 1, kT, kB});
  CHECK(img.value()[0] == Catch::Approx(pool[3].values[0]));
  CHECK(img.value()[kT * kB + 5] == Catch::Approx(pool[0].values[5]));
  const auto seq = sequence_batch(pool, idx);
  REQUIRE(seq.shape() == nn::Shape{kT * 2, kB});
  // row t*N + n holds frame t of window n
  CHECK(seq.value()[(4 * 2 + 1) * kB + 7] == Catch::Approx(pool[0].at(4, 7)));
  CHECK(seq.value()[(4 * 2 + 0) * kB + 7] == Catch::Approx(pool[3].at(4, 7)));
}

// ---- train ----------------------------------------------------------------

TEST_CASE("zero epochs returns the initialization") {
  const auto split = toy_split();
  for (Method m : {Method::Baseline, Method::Da, Method::Proto}) {
    auto cfg = small_config(m, {"train.epochs=0"});
    const auto r = train(cfg, split);
    CHECK(r.history.empty());
    Model init(m, kT, kB, m == Method::Baseline ? cfg.train.hidden : 0, cfg.seed);
    CHECK(same_tensors(r.checkpoint, nn::snapshot(init.params())));
  }
}

TEST_CASE("training is deterministic given the seed and changes the weights") {
  const auto split = toy_split();
  for (Method m : {Method::Baseline, Method::Da, Method::Siamese, Method::Proto, Method::Local}) {
    INFO(to_string(m));
    const auto cfg = small_config(m);
    const auto a = train(cfg, split);
    const auto b = train(cfg, split);
    CHECK(same_tensors(a.checkpoint, b.checkpoint));
    REQUIRE(a.history.size() == 1);
    CHECK(std::isfinite(a.history[0].loss));
    CHECK(a.history[0].loss == b.history[0].loss);
    CHECK(std::isnan(a.history[0].probe_mmd) == (m != Method::Da));
    Model init(m, kT, kB, m == Method::Baseline ? cfg.train.hidden : 0, cfg.seed);
    CHECK_FALSE(same_tensors(a.checkpoint, nn::snapshot(init.params())));
    CHECK(a.checkpoint.meta["config_hash"] == cfg.hash());
    // The model card is enough to rebuild the model.
    auto restored = Model::from_checkpoint(a.checkpoint);
    CHECK(restored->method() == m);
  }
}

TEST_CASE("a non-finite loss is a numeric failure") {
  auto split = toy_split();
  auto ws = windows("lab", {101}, {0}, 3, 1);
  for (auto& w : ws) w.values[0] = std::nanf("");
  split.basic_training = data::WindowPool(ws);
  const auto cfg = small_config(Method::Proto);
  CHECK(throws_kind([&] { train(cfg, split); }, ErrorKind::Numeric));
}

TEST_CASE("labeled target mask is stratified per subject and class") {
  const data::WindowPool pool(windows("uncontrolled", {1, 2}, {0}, 4, 8));
  for (double ratio : {0.0, 0.5, 1.0}) {
    const auto mask = labeled_target_mask(pool, ratio, 3);
    std::map<std::pair<int, int>, int> count;
    for (std::size_t i = 0; i < pool.size(); ++i) count[{pool[i].subject, pool[i].label}] += mask[i];
    for (const auto& [key, n] : count) CHECK(n == static_cast<int>(std::lround(4 * ratio)));
  }
  CHECK(labeled_target_mask(pool, 0.5, 3) == labeled_target_mask(pool, 0.5, 3));
  CHECK(labeled_target_mask(pool, 0.5, 3) != labeled_target_mask(pool, 0.5, 4));
}

// ---- evaluate -------------------------------------------------------------

TEST_CASE("closed-set scoring") {
  const data::WindowPool pool(windows("uncontrolled", {1, 2}, {0}, 3, 9));
  std::vector<int> truth;
  for (std::size_t i = 0; i < pool.size(); ++i) truth.push_back(pool[i].label);

  SECTION("a perfect classifier scores 100") {
    const auto t = score_closed(pool, truth);
    REQUIRE(t.rows.size() == 2);
    for (const auto& r : t.rows) {
      CHECK(r.accuracy_pct == 100.0);
      CHECK(r.n_queries == 27);
    }
    CHECK(t.pooled_accuracy() == 100.0);
    for (int c = 0; c < sim::kNumClasses; ++c) CHECK(t.confusion[c][c] == 6);
  }
  SECTION("a constant predictor on balanced classes scores one ninth") {
    const auto t = score_closed(pool, std::vector<int>(pool.size(), 4));
    CHECK(t.mean_accuracy() == Catch::Approx(100.0 / 9.0));
  }
  SECTION("uniform random guessing approaches one ninth") {
    const data::WindowPool big(windows("uncontrolled", {1}, {0}, 400, 10));
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> guess(0, 8);
    std::vector<int> pred(big.size());
    for (auto& p : pred) p = guess(rng);
    // 3600 Bernoulli(1/9) trials: sd of the rate is 0.52 points.
    CHECK(std::abs(score_closed(big, pred).mean_accuracy() - 100.0 / 9.0) < 2.0);
  }
  CHECK_THROWS(score_closed(pool, std::vector<int>(3, 0)));
  CHECK_THROWS(score_closed(data::WindowPool(), {}));
}

TEST_CASE("evaluate_closed runs the model and rejects misuse") {
  const auto split = toy_split();
  auto cfg = small_config(Method::Da);
  auto model = Model::from_checkpoint(train(cfg, split).checkpoint);
  const auto t = evaluate_closed(*model, split.testing);
  CHECK(t.rows.size() == 2);
  for (const auto& r : t.rows) CHECK((r.accuracy_pct >= 0.0 && r.accuracy_pct <= 100.0));
  CHECK_THROWS(evaluate_closed(*model, data::WindowPool()));
  Model proto(Method::Proto, kT, kB, 0, 1);
  CHECK(throws_kind([&] { evaluate_closed(proto, split.testing); }, ErrorKind::Config));
}

TEST_CASE("few-shot evaluation protocol") {
  const auto split = toy_split(3);

  SECTION("a query identical to its only support is classified correctly") {
    for (Method m : {Method::Proto, Method::Local}) {
      INFO(to_string(m));
      Model model(m, kT, kB, 0, 21);
      auto supports = windows("uncontrolled", {1}, {0}, 1, 30);
      auto queries = supports;
      for (auto& q : queries) q.session = 5;
      FewShotEvalOptions opts;
      opts.k_shot = 1;
      opts.iterations = 1;
      const auto t = evaluate_fewshot(model, data::WindowPool(supports), data::WindowPool(queries), opts);
      REQUIRE(t.rows.size() == 1);
      CHECK(t.rows[0].accuracy_pct == 100.0);
    }
  }
  SECTION("one iteration with the same seed repeats exactly") {
    Model model(Method::Siamese, kT, kB, 0, 2);
    FewShotEvalOptions opts;
    opts.k_shot = 2;
    opts.iterations = 1;
    opts.seed = 9;
    const auto a = evaluate_fewshot(model, split.subject_development, split.testing, opts);
    const auto b = evaluate_fewshot(model, split.subject_development, split.testing, opts);
    CHECK(a.rows[0].accuracy_pct == b.rows[0].accuracy_pct);
    CHECK(a.confusion == b.confusion);
  }
  SECTION("results do not depend on the worker count") {
    Model model(Method::Proto, kT, kB, 0, 2);
    FewShotEvalOptions opts;
    opts.k_shot = 2;
    opts.iterations = 8;
    ResultTable a, b;
    {
      EnvGuard env("SONARFIT_THREADS", "1");
      a = evaluate_fewshot(model, split.subject_development, split.testing, opts);
    }
    {
      EnvGuard env("SONARFIT_THREADS", "3");
      b = evaluate_fewshot(model, split.subject_development, split.testing, opts);
    }
    CHECK(a.confusion == b.confusion);
    CHECK(a.k_shot == 2);
    CHECK(a.rows.size() == 2);
    CHECK(a.rows[0].n_queries == 2 * 9 * 3);
  }
  SECTION("too few supports and shared sessions are rejected") {
    Model model(Method::Proto, kT, kB, 0, 2);
    FewShotEvalOptions opts;
    opts.k_shot = 7;
    CHECK(throws_kind([&] { evaluate_fewshot(model, split.subject_development, split.testing, opts); },
                      ErrorKind::InvalidArgument));
    opts.k_shot = 1;
    CHECK_THROWS_WITH(evaluate_fewshot(model, split.testing, split.testing, opts),
                      ContainsSubstring("feeds both supports and queries"));
    Model base(Method::Baseline, kT, kB, 4, 2);
    CHECK(throws_kind([&] { evaluate_fewshot(base, split.subject_development, split.testing, opts); },
                      ErrorKind::Config));
  }
  SECTION("pooled supports draw across subjects") {
    Model model(Method::Proto, kT, kB, 0, 2);
    auto dev = windows("uncontrolled", {1}, {0}, 2, 40);
    FewShotEvalOptions opts;
    opts.k_shot = 2;
    opts.iterations = 2;
    const data::WindowPool queries(windows("uncontrolled", {2}, {3}, 1, 41));
    CHECK_THROWS(evaluate_fewshot(model, data::WindowPool(dev), queries, opts));
    opts.pooled_supports = true;
    CHECK(evaluate_fewshot(model, data::WindowPool(dev), queries, opts).rows.size() == 1);
  }
}

// ---- report ---------------------------------------------------------------

namespace {

std::vector<ResultTable> two_methods() {
  std::vector<ResultTable> tables;
  for (const char* m : {"proto", "local"}) {
    ResultTable t;
    t.method = m;
    t.k_shot = 5;
    t.seed = 3;
    t.config_hash = std::string(m) == "proto" ? "00000000000000aa" : "00000000000000bb";
    for (int s = 1; s <= 5; ++s) t.rows.push_back({s, 10.0 * s + (m[0] == 'p'), 40});
    t.confusion[0][0] = 3;
    tables.push_back(t);
  }
  return tables;
}

}  // namespace

TEST_CASE("results CSV has one row per method and subject in a stable order") {
  auto tables = two_methods();
  const std::string csv = results_csv(tables);
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 11);
  CHECK(lines[0] == "method,subject,k_shot,label_ratio,seed,accuracy_pct,n_queries,config_hash");
  CHECK(lines[1] == "local,1,5,,3,10.0000,40,00000000000000bb");
  CHECK(lines[6] == "proto,1,5,,3,11.0000,40,00000000000000aa");
  std::swap(tables[0], tables[1]);
  std::reverse(tables[0].rows.begin(), tables[0].rows.end());
  CHECK(results_csv(tables) == csv);
}

TEST_CASE("report writes CSV, summary and a PNG, byte-identical on rerun") {
  const auto dir = temp_dir("report");
  auto tables = two_methods();
  ResultTable da;
  da.method = "da";
  da.label_ratio = 0.5;
  da.seed = 1;
  da.config_hash = "00000000000000cc";
  da.rows = {{1, 50.0, 100}, {2, 60.0, 100}};
  tables.push_back(da);
  report(tables, dir / "a");
  report(tables, dir / "b");
  for (const char* f : {"results.csv", "summary.txt", "accuracy_by_subject.png"}) {
    REQUIRE(std::filesystem::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const std::string png = slurp(dir / "a" / "accuracy_by_subject.png");
  CHECK(png.substr(1, 3) == "PNG");
  const std::string summary = slurp(dir / "a" / "summary.txt");
  CHECK_THAT(summary, ContainsSubstring("da 50%"));
  CHECK_THAT(summary, ContainsSubstring("proto k=5"));
  CHECK_THAT(slurp(dir / "a" / "results.csv"), ContainsSubstring("da,1,0,0.50,1,50.0000,100"));

  CHECK_THROWS(report({}, dir / "c"));
  {
    std::ofstream f(dir / "file");
    f << "x";
  }
  CHECK(throws_kind([&] { report(tables, dir / "file" / "sub"); }, ErrorKind::Io));
  tables[0].rows[0].accuracy_pct = 101.0;
  CHECK_THROWS(report(tables, dir / "d"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("result tables survive the JSON round trip") {
  auto t = two_methods()[0];
  t.confusion[2][5] = 17;
  t.label_ratio = -1.0;
  const auto back = table_from_json(table_to_json(t));
  CHECK(back.method == t.method);
  CHECK(back.k_shot == t.k_shot);
  CHECK(back.seed == t.seed);
  CHECK(back.config_hash == t.config_hash);
  CHECK(back.confusion == t.confusion);
  REQUIRE(back.rows.size() == t.rows.size());
  CHECK(back.rows[4].accuracy_pct == t.rows[4].accuracy_pct);
  CHECK(throws_kind([] { table_from_json(nlohmann::json::object()); }, ErrorKind::Io));
}
