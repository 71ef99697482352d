#include "sonarfit/harness/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <functional>

#include "sonarfit/dsp/stft.hpp"
#include "sonarfit/error.hpp"
#include "sonarfit/models/baseline.hpp"
#include "sonarfit/models/domain_adaptation.hpp"
#include "sonarfit/models/fewshot.hpp"
#include "sonarfit/models/mmd.hpp"
#include "sonarfit/nn/conv.hpp"
#include "sonarfit/nn/gradcheck.hpp"
#include "sonarfit/nn/layers.hpp"
#include "sonarfit/nn/ops.hpp"
#include "sonarfit/sim/kinematics.hpp"
#include "sonarfit/sim/synth.hpp"

namespace sonarfit::harness {
namespace {

using nn::Array;
using nn::NamedTensor;
using nn::Rng;
using nn::Tensor;

constexpr double kGradTolerance = 1e-4;

// Model losses rebuild a whole backbone per evaluation, so they are probed at
// fewer coordinates per tensor than the small layers.
constexpr std::size_t kModelCoords = 6;

Array random_array(nn::Shape shape, Rng& rng, double scale = 1.0) {
  Array a(std::move(shape));
  std::normal_distribution<double> dist(0.0, scale);
  for (double& v : a.values()) v = dist(rng);
  return a;
}

std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> out(n);
  for (int& l : out) l = d(rng);
  return out;
}

// Every class 0..n_way-1 appears `shots` times, in order.
std::vector<int> grouped_labels(std::size_t n_way, std::size_t shots) {
  std::vector<int> out;
  for (std::size_t c = 0; c < n_way; ++c) out.insert(out.end(), shots, static_cast<int>(c));
  return out;
}

double run_check(std::vector<NamedTensor> leaves, const std::function<Tensor()>& loss, Rng& rng,
                 std::size_t coords = 48) {
  nn::GradCheckOptions opts;
  opts.max_coords = coords;
  return nn::max_rel_error(nn::check_gradients(leaves, loss, rng, opts));
}

std::vector<NamedTensor> with_input(const nn::ParameterSet& params, const Tensor& x) {
  auto leaves = nn::trainable_leaves(params);
  leaves.push_back({"input", x});
  return leaves;
}

using Trial = std::function<double(Rng&)>;

double dense_trial(Rng& rng) {
  nn::ParameterSet params;
  nn::Dense d(params, "d", 3, 4, rng);
  Tensor x = Tensor::leaf(random_array({2, 3}, rng));
  const Array w = random_array({2, 4}, rng);
  return run_check(with_input(params, x), [&] { return nn::weighted_sum(d.forward(x), w); }, rng);
}

double conv_trial(Rng& rng) {
  nn::ParameterSet params;
  nn::Conv2dLayer c(params, "c", 2, 3, rng);
  Tensor x = Tensor::leaf(random_array({2, 2, 4, 5}, rng));
  const Array w = random_array({2, 3, 4, 5}, rng);
  return run_check(with_input(params, x), [&] { return nn::weighted_sum(c.forward(x), w); }, rng);
}

double batch_norm_trial(Rng& rng) {
  nn::ParameterSet params;
  nn::BatchNorm2d bn(params, "bn", 2);
  for (auto& e : params.entries()) {
    Tensor t = e.tensor;
    if (e.trainable) t.mutable_value() = random_array(t.shape(), rng);
  }
  Tensor x = Tensor::leaf(random_array({3, 2, 3, 3}, rng));
  const Array w = random_array({3, 2, 3, 3}, rng);
  return run_check(with_input(params, x), [&] { return nn::weighted_sum(bn.forward(x, true), w); },
                   rng);
}

double max_pool_trial(Rng& rng) {
  Tensor x = Tensor::leaf(random_array({2, 2, 4, 5}, rng));
  const Array w = random_array({2, 2, 2, 2}, rng);
  return run_check({{"input", x}}, [&] { return nn::weighted_sum(nn::max_pool2d(x), w); }, rng);
}

double leaky_relu_trial(Rng& rng) {
  Tensor x = Tensor::leaf(random_array({3, 4}, rng));
  const Array w = random_array({3, 4}, rng);
  return run_check({{"input", x}},
                   [&] { return nn::weighted_sum(nn::leaky_relu(x, models::kLeakySlope), w); }, rng);
}

double lstm_trial(Rng& rng) {
  nn::ParameterSet params;
  nn::LstmDirection fwd(params, "f", 3, 4, rng);
  nn::LstmDirection bwd(params, "b", 3, 4, rng);
  Tensor x = Tensor::leaf(random_array({3 * 2, 3}, rng));
  const Array w1 = random_array({6, 4}, rng), w2 = random_array({6, 4}, rng);
  return run_check(with_input(params, x),
                   [&] {
                     return nn::add(nn::weighted_sum(fwd.forward(x, 3, 2, false), w1),
                                    nn::weighted_sum(bwd.forward(x, 3, 2, true), w2));
                   },
                   rng);
}

double bilstm_trial(Rng& rng) {
  nn::ParameterSet params;
  nn::BiLstm l(params, "l", 2, 3, rng);
  Tensor x = Tensor::leaf(random_array({4 * 2, 2}, rng));
  const Array w = random_array({8, 6}, rng);
  return run_check(with_input(params, x), [&] { return nn::weighted_sum(l.forward(x, 4, 2), w); },
                   rng);
}

double mmd_trial(Rng& rng) {
  Tensor x = Tensor::leaf(random_array({3, 4}, rng));
  Tensor y = Tensor::leaf(random_array({4, 4}, rng, 1.5));
  return run_check({{"x", x}, {"y", y}}, [&] { return models::mmd(x, y); }, rng);
}

double baseline_trial(Rng& rng) {
  nn::ParameterSet params;
  const std::size_t frames = 3, batch = 2, bins = 5;
  models::BaselineModel model(params, bins, 4, sim::kNumClasses, rng);
  Tensor x = Tensor::leaf(random_array({frames * batch, bins}, rng));
  const auto labels = random_labels(batch, sim::kNumClasses, rng);
  return run_check(with_input(params, x),
                   [&] { return nn::softmax_cross_entropy(model.logits(x, frames, batch), labels); },
                   rng, kModelCoords);
}

double da_trial(Rng& rng) {
  nn::ParameterSet params;
  models::DomainAdaptationModel model(params, 16, 16, sim::kNumClasses, rng);
  Tensor xs = Tensor::leaf(random_array({3, 1, 16, 16}, rng));
  Tensor xt = Tensor::leaf(random_array({3, 1, 16, 16}, rng, 1.3));
  const auto ys = random_labels(3, sim::kNumClasses, rng);
  auto yt = random_labels(3, sim::kNumClasses, rng);
  yt[1] = -1;
  models::DaLossOptions opts;
  opts.label_ratio = 0.5;
  auto leaves = nn::trainable_leaves(params);
  leaves.push_back({"source", xs});
  leaves.push_back({"target", xt});
  return run_check(leaves, [&] { return models::da_loss(model, xs, ys, xt, yt, opts).total; }, rng,
                   kModelCoords);
}

double fewshot_trial(models::FewShotMethod method, Rng& rng) {
  nn::ParameterSet params;
  // LocalNet needs at least k descriptors per class, hence two columns.
  const std::size_t bins = method == models::FewShotMethod::Local ? 32 : 16;
  models::FewShotModel model(params, method, 16, bins, rng);
  const std::size_t n_way = 2, shots = 2, queries = 2;
  Tensor x = Tensor::leaf(random_array({n_way * shots + queries, 1, 16, bins}, rng));
  const auto support_labels = grouped_labels(n_way, shots);
  const auto query_labels = random_labels(queries, static_cast<int>(n_way), rng);
  return run_check(with_input(params, x),
                   [&] {
                     const auto e = model.embed(x, true);
                     const auto s = e.slice(0, n_way * shots);
                     const auto q = e.slice(n_way * shots, queries);
                     return nn::softmax_cross_entropy(model.scores(s, support_labels, n_way, q),
                                                      query_labels);
                   },
                   rng, kModelCoords);
}

const std::vector<std::pair<std::string, Trial>>& registry() {
  static const std::vector<std::pair<std::string, Trial>> r = {
      {"dense", dense_trial},
      {"conv2d", conv_trial},
      {"batch_norm2d", batch_norm_trial},
      {"max_pool2d", max_pool_trial},
      {"leaky_relu", leaky_relu_trial},
      {"lstm", lstm_trial},
      {"bilstm", bilstm_trial},
      {"mmd", mmd_trial},
      {"baseline_ce", baseline_trial},
      {"da_loss", da_trial},
      {"siamese_nll", [](Rng& rng) { return fewshot_trial(models::FewShotMethod::Siamese, rng); }},
      {"proto_nll", [](Rng& rng) { return fewshot_trial(models::FewShotMethod::Proto, rng); }},
      {"local_ce", [](Rng& rng) { return fewshot_trial(models::FewShotMethod::Local, rng); }},
  };
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<std::string> gradient_check_names() {
  std::vector<std::string> out;
  for (const auto& [name, trial] : registry()) out.push_back(name);
  return out;
}

CheckOutcome gradient_check(const std::string& name, int trials, std::uint64_t seed) {
  require(trials >= 1, "gradient_check: trials must be >= 1");
  for (const auto& [n, trial] : registry()) {
    if (n != name) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      const double e = trial(rng);
      worst = std::isfinite(e) ? std::max(worst, e) : INFINITY;
    }
    return {"gradient", name, worst, kGradTolerance, worst <= kGradTolerance, seconds_since(t0)};
  }
  fail(ErrorKind::InvalidArgument, "unknown gradient check '" + name + "'");
}

std::vector<CheckOutcome> gradient_suite(int trials, std::uint64_t seed) {
  std::vector<CheckOutcome> out;
  std::uint64_t s = seed;
  for (const auto& name : gradient_check_names()) out.push_back(gradient_check(name, trials, s++));
  return out;
}

std::vector<CheckOutcome> dsp_oracle_suite() {
  std::vector<CheckOutcome> out;

  {
    const auto t0 = std::chrono::steady_clock::now();
    const dsp::StftConfig cfg;
    // Tone centered on the carrier's FFT bin should read 0 dB there.
    const double k = std::round(sim::kCarrierHz / cfg.grid_spacing_hz());
    const double f = k * cfg.grid_spacing_hz();
    std::vector<float> x(cfg.window_len + cfg.hop);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = static_cast<float>(std::cos(2.0 * std::numbers::pi * f * i / cfg.sample_rate_hz));
    }
    const auto spec = dsp::stft(x, cfg);
    const double err = std::abs(spec.at(0, static_cast<std::size_t>(spec.carrier_bin)));
    out.push_back({"dsp", "unit_tone_db", err, 1e-3, err <= 1e-3, seconds_since(t0)});
  }
  {
    const dsp::StftConfig cfg;
    const double res = std::abs(cfg.analysis_resolution_hz() - 3.6);
    const double period = std::abs(std::round(cfg.frame_period_s() * 1e5) / 1e2 - 46.44);
    const double err = std::max(res, period);
    out.push_back({"dsp", "resolution_constants", err, 1e-9, err <= 1e-9, 0.0});
  }
  for (double v : {0.1, 0.5, 1.0, 5.0, 17.4}) {
    const auto t0 = std::chrono::steady_clock::now();
    sim::Scatterer sc{0.05, [v](double) { return v; }};
    sim::SynthOptions so;
    so.add_noise = false;
    const auto clip = sim::render_scatterers(std::span(&sc, 1), 1.0, {}, so);
    dsp::StftConfig cfg;
    cfg.band_low_hz = 17500.0;
    cfg.band_high_hz = cfg.sample_rate_hz / 2.0;
    const auto spec = dsp::stft(clip, cfg);
    long best = -1;
    double best_power = -1.0;
    for (std::size_t b = 0; b < spec.bins; ++b) {
      if (std::abs(static_cast<long>(b) - spec.carrier_bin) <= 2) continue;
      double p = 0.0;
      for (std::size_t t = 0; t < spec.frames; ++t) p += std::pow(10.0, spec.at(t, b) / 10.0);
      if (p > best_power) {
        best_power = p;
        best = static_cast<long>(b);
      }
    }
    const long expected = std::lround(sim::doppler_shift_hz(v) / spec.grid_spacing_hz);
    const double off = std::abs(static_cast<double>(best - spec.carrier_bin - expected));
    char name[48];
    std::snprintf(name, sizeof name, "doppler_peak_%.1f_mps", v);
    out.push_back({"dsp", name, off, 1.0, off <= 1.0, seconds_since(t0)});
  }
  return out;
}

std::vector<CheckOutcome> run_selftest(const SelfTestOptions& opts) {
  std::vector<CheckOutcome> out;
  if (opts.dsp) {
    const auto d = dsp_oracle_suite();
    out.insert(out.end(), d.begin(), d.end());
  }
  if (opts.gradients) {
    const auto g = gradient_suite(opts.trials, opts.seed);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

bool all_passed(const std::vector<CheckOutcome>& outcomes) {
  for (const auto& o : outcomes) {
    if (!o.passed) return false;
  }
  return !outcomes.empty();
}

}  // namespace sonarfit::harness
