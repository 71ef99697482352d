#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck_util.hpp"
#include "sonarfit/dsp/windows.hpp"
#include "sonarfit/error.hpp"
#include "sonarfit/harness/selftest.hpp"
#include "sonarfit/models/baseline.hpp"
#include "sonarfit/models/domain_adaptation.hpp"
#include "sonarfit/models/fewshot.hpp"
#include "sonarfit/models/mmd.hpp"
#include "sonarfit/nn/checkpoint.hpp"

using namespace sonarfit;
using nn::Array;
using nn::Tensor;
using testutil::random_array;

namespace {

Tensor constant(nn::Shape shape, std::vector<double> v) {
  return Tensor::constant(Array(std::move(shape), std::move(v)));
}

// Independent biased MMD^2 with one Gaussian kernel.
double mmd_oracle(const Array& x, const Array& y, double sigma) {
  const std::size_t n = x.dim(0), m = y.dim(0), d = x.dim(1);
  auto k = [&](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-s / (2.0 * sigma * sigma));
  };
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) xx += k(x.data() + i * d, x.data() + j * d);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) yy += k(y.data() + i * d, y.data() + j * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) xy += k(x.data() + i * d, y.data() + j * d);
  return xx / (n * n) + yy / (m * m) - 2.0 * xy / (n * m);
}

double median_distance(const Array& x, const Array& y) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < x.dim(0); ++i)
    rows.emplace_back(x.data() + i * x.dim(1), x.data() + (i + 1) * x.dim(1));
  for (std::size_t i = 0; i < y.dim(0); ++i)
    rows.emplace_back(y.data() + i * y.dim(1), y.data() + (i + 1) * y.dim(1));
  std::vector<double> d;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < rows[i].size(); ++k) s += std::pow(rows[i][k] - rows[j][k], 2);
      d.push_back(std::sqrt(s));
    }
  }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

Tensor window_sequence(const std::vector<dsp::SampleWindow>& ws) {
  const std::size_t t = ws[0].frames, b = ws[0].bins, n = ws.size();
  Array a({t * n, b});
  for (std::size_t f = 0; f < t; ++f)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < b; ++k) a[(f * n + i) * b + k] = ws[i].at(f, k);
  return Tensor::constant(std::move(a));
}

}  // namespace

TEST_CASE("model losses pass finite-difference checks", "[models][grad]") {
  for (const std::string name :
       {"mmd", "baseline_ce", "da_loss", "siamese_nll", "proto_nll", "local_ce"}) {
    const auto r = harness::gradient_check(name, 5, 101);
    INFO(name << " worst relative error " << r.value);
    CHECK(r.value <= 1e-4);
  }
}

TEST_CASE("mmd closed forms and properties", "[models][mmd]") {
  nn::Rng rng(21);
  const Array a = random_array({5, 3}, rng);
  CHECK(std::abs(models::mmd(Tensor::constant(a), Tensor::constant(a)).item()) <= 1e-10);

  // Two singletons at distance r with one kernel of width sigma.
  const double r = 1.7, sigma = 0.8;
  models::MmdOptions single;
  single.multipliers = {1.0};
  single.fixed_bandwidth = sigma;
  const double got = models::mmd(constant({1, 2}, {0.3, -0.2}), constant({1, 2}, {0.3 + r, -0.2}),
                                 single)
                         .item();
  CHECK(got == Catch::Approx(2.0 * (1.0 - std::exp(-r * r / (2 * sigma * sigma)))).epsilon(1e-12));

  for (int trial = 0; trial < 10; ++trial) {
    const Array x = random_array({4, 3}, rng);
    const Array y = random_array({6, 3}, rng, 2.0);
    const double xy = models::mmd(Tensor::constant(x), Tensor::constant(y)).item();
    const double yx = models::mmd(Tensor::constant(y), Tensor::constant(x)).item();
    CHECK(xy >= 0.0);
    CHECK(std::abs(xy - yx) <= 1e-12);

    // Default mixture = mean of single kernels at median * {0.5, 1, 2}.
    const double med = median_distance(x, y);
    const double expect =
        (mmd_oracle(x, y, 0.5 * med) + mmd_oracle(x, y, med) + mmd_oracle(x, y, 2.0 * med)) / 3.0;
    CHECK(xy == Catch::Approx(expect).epsilon(1e-10));
  }
  CHECK_THROWS_AS(models::mmd(Tensor::constant(Array({0, 3})), Tensor::constant(a)), Error);
  CHECK_THROWS_AS(models::mmd(Tensor::constant(a), Tensor::constant(Array({2, 4}))), Error);
}

TEST_CASE("baseline logits", "[models][baseline]") {
  nn::Rng rng(3);
  nn::ParameterSet params;
  const std::size_t frames = 6, bins = 5;
  models::BaselineModel model(params, bins, 4, sim::kNumClasses, rng);

  std::vector<dsp::SampleWindow> raw(2), shifted(2);
  std::normal_distribution<float> d(-60.0f, 8.0f);
  for (std::size_t i = 0; i < 2; ++i) {
    raw[i].frames = frames;
    raw[i].bins = bins;
    for (std::size_t k = 0; k < frames * bins; ++k) raw[i].values.push_back(d(rng));
    // A gain in the linear domain is an offset in dB; also stretch the scale.
    shifted[i] = raw[i];
    for (float& v : shifted[i].values) v = 1.5f * v + 12.0f;
    raw[i] = dsp::instance_normalize(raw[i]);
    shifted[i] = dsp::instance_normalize(shifted[i]);
  }
  const Tensor a = model.logits(window_sequence(raw), frames, 2);
  const Tensor b = model.logits(window_sequence(shifted), frames, 2);
  REQUIRE(a.shape() == nn::Shape{2, 9});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.value()[i] == Catch::Approx(b.value()[i]).margin(1e-5));

  Array plus = a.value();
  for (double& v : plus.values()) v += 3.25;
  CHECK(nn::argmax_rows(plus) == nn::argmax_rows(a.value()));

  CHECK_THROWS_AS(model.logits(window_sequence(raw), frames + 1, 2), Error);
  CHECK_THROWS_AS(model.logits(Tensor::constant(Array({frames * 2, bins + 1})), frames, 2), Error);
}

TEST_CASE("domain adaptation loss terms", "[models][da]") {
  CHECK_NOTHROW(models::validate_label_ratio(0.5, false));
  CHECK_THROWS_AS(models::validate_label_ratio(0.7, false), Error);
  try {
    models::validate_label_ratio(0.7, false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
  CHECK_NOTHROW(models::validate_label_ratio(0.7, true));
  CHECK_THROWS_AS(models::validate_label_ratio(1.2, true), Error);

  nn::Rng rng(8);
  nn::ParameterSet params;
  models::DomainAdaptationModel model(params, 16, 16, sim::kNumClasses, rng);
  const Tensor xs = Tensor::constant(random_array({4, 1, 16, 16}, rng));
  const Tensor xt = Tensor::constant(random_array({4, 1, 16, 16}, rng, 2.0));
  const std::vector<int> ys{0, 3, 5, 8};

  models::DaLossOptions none;
  none.label_ratio = 0.0;
  {
    nn::NoGradGuard g;
    const auto same = models::da_loss(model, xs, ys, xs, ys, none);
    CHECK(same.labeled_targets == 0);
    CHECK(same.target_ce.item() == 0.0);
    CHECK(std::abs(same.mmd.item()) <= 1e-10);
    CHECK(same.total.item() == Catch::Approx(same.source_ce.item()).margin(1e-10));
  }

  models::DaLossOptions half;
  half.label_ratio = 0.5;
  const std::vector<int> yt{2, -1, 7, -1};
  nn::NoGradGuard g;
  const auto terms = models::da_loss(model, xs, ys, xt, yt, half);
  CHECK(terms.labeled_targets == 2);
  CHECK(terms.mmd.item() > 0.0);
  CHECK(terms.total.item() ==
        Catch::Approx(terms.source_ce.item() + terms.target_ce.item() + terms.mmd.item()));

  // Target CE is the mean over labeled targets only.
  const auto emb = model.backbone().forward(models::concat_batch({xs, xt}), true).embedding;
  const Array logits = model.head(nn::slice_rows(emb, 4, 4)).value();
  const Array p = nn::softmax_rows(logits);
  const double expect = -(std::log(p[0 * 9 + 2]) + std::log(p[2 * 9 + 7])) / 2.0;
  CHECK(terms.target_ce.item() == Catch::Approx(expect).epsilon(1e-12));

  auto doubled = half;
  doubled.mmd_weight = 2.0;
  const auto t2 = models::da_loss(model, xs, ys, xt, yt, doubled);
  CHECK(t2.total.item() - terms.total.item() == Catch::Approx(terms.mmd.item()).epsilon(1e-9));

  models::DaLossOptions full;
  full.label_ratio = 1.0;
  const auto all = models::da_loss(model, xs, ys, xt, std::vector<int>{1, 2, 3, 4}, full);
  CHECK(all.labeled_targets == 4);
  CHECK(all.source_ce.item() > 0.0);
  CHECK(all.target_ce.item() > 0.0);
  CHECK(all.mmd.item() > 0.0);

  models::DaLossOptions bad;
  bad.label_ratio = 0.3;
  CHECK_THROWS_AS(models::da_loss(model, xs, ys, xt, yt, bad), Error);
}

TEST_CASE("siamese scores", "[models][fewshot]") {
  nn::Rng rng(4);
  nn::ParameterSet params;
  nn::Dense phi(params, "phi", 3, 1, rng);
  const Tensor means = constant({3, 3}, {1, 2, 3, 1, 2, 3, -4, 0, 1});
  const Tensor q = constant({2, 3}, {1, 2, 3, 0.5, 0.1, -2});
  const Array s = models::siamese_scores(q, means, phi).value();
  REQUIRE(s.shape() == nn::Shape{2, 3});
  CHECK(s[0] == Catch::Approx(0.5).margin(1e-15));  // zero difference, zero bias
  for (double v : s.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // Classes 0 and 1 share a mean, so they tie and the lower index wins.
  CHECK(s[3] == s[4]);
  CHECK(s[0] == s[1]);
  Array tie({1, 3}, std::vector<double>{0.7, 0.7, 0.1});
  CHECK(nn::argmax_rows(tie)[0] == 0);
}

TEST_CASE("prototype classification", "[models][fewshot]") {
  const Tensor sup = constant({2, 2}, {0, 0, 2, 2});
  const Array proto = nn::class_means(sup, {0, 0}, 1).value();
  CHECK(proto[0] == 1.0);
  CHECK(proto[1] == 1.0);

  const Tensor protos = constant({2, 2}, {0, 0, 2, 0});
  for (double eps : {1e-6, 0.01, 0.5}) {
    const Array l = models::proto_logits(constant({1, 2}, {1 - eps, 0}), protos).value();
    CHECK(nn::argmax_rows(l)[0] == 0);
  }
  const Array at = models::proto_logits(constant({1, 2}, {2, 0}), protos).value();
  CHECK(nn::argmax_rows(at)[0] == 1);
  CHECK(at[1] == 0.0);

  // Permuting supports inside a class must not change the prototype bits.
  nn::Rng rng(12);
  const Array e = random_array({6, 5}, rng, 3.0);
  const std::vector<int> labels{0, 1, 0, 1, 0, 1};
  std::vector<std::size_t> perm{4, 1, 0, 5, 2, 3};
  const Array base = nn::class_means(Tensor::constant(e), labels, 2).value();
  std::vector<int> plabels;
  for (std::size_t i : perm) plabels.push_back(labels[i]);
  const Array shuffled =
      nn::class_means(nn::gather_rows(Tensor::constant(e), perm), plabels, 2).value();
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(base[i] == shuffled[i]);
}

TEST_CASE("local descriptor classification", "[models][fewshot]") {
  nn::Rng rng(5);
  const std::size_t locals = 4, depth = 6;

  // Query map equal to the only support map of class 0, k = 1.
  const Array map = random_array({locals, depth}, rng);
  const Array other = random_array({locals, depth}, rng);
  Array support({2 * locals, depth});
  std::copy(map.values().begin(), map.values().end(), support.data());
  std::copy(other.values().begin(), other.values().end(), support.data() + locals * depth);
  const std::vector<int> tags{0, 0, 0, 0, 1, 1, 1, 1};
  const Array self = models::local_logits(Tensor::constant(map), locals,
                                          Tensor::constant(support), tags, 2, 1)
                         .value();
  CHECK(self[0] == Catch::Approx(static_cast<double>(locals)).epsilon(1e-12));
  CHECK(self[1] <= self[0]);

  // Positive rescaling of any descriptor changes nothing.
  Array scaled_q = map, scaled_s = support;
  std::uniform_real_distribution<double> pos(0.1, 10.0);
  for (std::size_t r = 0; r < locals; ++r) {
    const double c = pos(rng);
    for (std::size_t j = 0; j < depth; ++j) scaled_q[r * depth + j] *= c;
  }
  for (std::size_t r = 0; r < 2 * locals; ++r) {
    const double c = pos(rng);
    for (std::size_t j = 0; j < depth; ++j) scaled_s[r * depth + j] *= c;
  }
  for (std::size_t k : {1u, 3u}) {
    const Array a = models::local_logits(Tensor::constant(map), locals,
                                         Tensor::constant(support), tags, 2, k)
                        .value();
    const Array b = models::local_logits(Tensor::constant(scaled_q), locals,
                                         Tensor::constant(scaled_s), tags, 2, k)
                        .value();
    CHECK(a[0] == Catch::Approx(b[0]).epsilon(1e-12));
    CHECK(a[1] == Catch::Approx(b[1]).epsilon(1e-12));
    // Each term is a cosine, so a logit is bounded by locals * k.
    CHECK(std::abs(a[0]) <= static_cast<double>(locals * k) + 1e-12);
  }

  // Orthogonal populations: class 0 lives in dims 0..2, class 1 in dims 3..5.
  std::uniform_real_distribution<double> u(0.2, 1.0);
  auto population = [&](std::size_t rows, std::size_t offset) {
    Array a({rows, depth}, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < 3; ++j) a[r * depth + offset + j] = u(rng);
    return a;
  };
  Array sup({8, depth});
  const Array s0 = population(4, 0), s1 = population(4, 3);
  std::copy(s0.values().begin(), s0.values().end(), sup.data());
  std::copy(s1.values().begin(), s1.values().end(), sup.data() + 4 * depth);
  // Query descriptors are copies of class 0 supports, so top-1 cosine is 1.
  const Array orth = models::local_logits(Tensor::constant(s0), 4, Tensor::constant(sup), tags,
                                          2, 1)
                         .value();
  CHECK(orth[0] == Catch::Approx(4.0).margin(1e-10));
  CHECK(std::abs(orth[1]) <= 1e-12);

  CHECK_THROWS_AS(models::local_logits(Tensor::constant(map), locals, Tensor::constant(support),
                                       tags, 2, 5),
                  Error);
}

TEST_CASE("few-shot models on a shared backbone", "[models][fewshot]") {
  CHECK(models::parse_fewshot_method("proto") == models::FewShotMethod::Proto);
  CHECK_THROWS_AS(models::parse_fewshot_method("matching"), Error);

  std::vector<std::string> hashes;
  std::vector<std::vector<nn::Shape>> shapes;
  for (int m = 0; m < 4; ++m) {
    nn::Rng rng(static_cast<std::uint64_t>(m + 1));
    nn::ParameterSet params;
    if (m == 3) {
      models::DomainAdaptationModel da(params, 129, 47, 9, rng);
      CHECK(da.backbone().embedding_dim() == 64 * 8 * 2);
    } else {
      models::FewShotModel f(params, static_cast<models::FewShotMethod>(m), 129, 47, rng);
      CHECK(f.backbone().map_height() == 8);
      CHECK(f.backbone().map_width() == 2);
    }
    hashes.push_back(nn::topology_hash(nn::snapshot(params)));
  }
  for (const auto& h : hashes) CHECK(h == hashes[0]);

  // A 9-way 5-shot episode scores 9 classes per query.
  nn::Rng rng(6);
  for (auto method : {models::FewShotMethod::Siamese, models::FewShotMethod::Proto,
                      models::FewShotMethod::Local}) {
    nn::ParameterSet params;
    models::FewShotModel model(params, method, 16, 32, rng);
    nn::NoGradGuard g;
    const auto sup = model.embed(Tensor::constant(random_array({45, 1, 16, 32}, rng)), false);
    const auto qry = model.embed(Tensor::constant(random_array({3, 1, 16, 32}, rng)), false);
    std::vector<int> labels;
    for (int c = 0; c < 9; ++c) labels.insert(labels.end(), 5, c);
    const Tensor s = model.scores(sup, labels, 9, qry);
    CHECK(s.shape() == nn::Shape{3, 9});

    // A query identical to its class's only support sits on the prototype.
    if (method == models::FewShotMethod::Proto) {
      const auto one = model.embed(Tensor::constant(random_array({9, 1, 16, 32}, rng)), false);
      std::vector<int> l9(9);
      std::iota(l9.begin(), l9.end(), 0);
      const Tensor self = model.scores(one, l9, 9, one.slice(4, 1));
      CHECK(nn::argmax_rows(self.value())[0] == 4);
    }
  }
}
