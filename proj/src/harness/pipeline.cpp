#include "sonarfit/harness/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "sonarfit/error.hpp"

namespace sonarfit::harness {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t domain_tag(const std::string& name) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : name) h = (h ^ c) * 1099511628211ull;
  return h;
}

}  // namespace

std::size_t thread_count() {
  if (const char* env = std::getenv("SONARFIT_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<std::size_t>(n);
    fail(ErrorKind::Config, std::string("SONARFIT_THREADS must be a positive integer, got '") +
                                env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<SubjectDraw> draw_subjects(const DomainSpec& spec, std::uint64_t data_seed) {
  const bool lab = spec.name == "lab";
  std::vector<SubjectDraw> out;
  for (int s = 0; s < spec.subjects; ++s) {
    SubjectDraw d;
    d.subject = (lab ? kLabSubjectBase : 1) + s;
    d.seed = splitmix(data_seed ^ splitmix(domain_tag(spec.name) + static_cast<std::uint64_t>(s)));
    std::mt19937_64 rng(d.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    d.shift = spec.shift;
    d.shift.speed_scale += spec.speed_jitter * (2.0 * u(rng) - 1.0);
    d.shift.gain_db -= spec.gain_jitter_db * u(rng);
    d.shift.seed = d.seed;
    out.push_back(d);
  }
  return out;
}

std::vector<sim::AudioClip> simulate_subject(const DomainSpec& spec, const SubjectDraw& draw,
                                             std::span<const sim::KinematicProfile> profiles) {
  sim::SynthOptions opts;
  opts.none_gap_min_s = spec.none_gap_min_s;
  opts.none_gap_max_s = spec.none_gap_max_s;
  sim::ClipInfo info;
  info.subject = draw.subject;
  info.domain = spec.name;
  return sim::build_domain_corpus(profiles, draw.shift, spec.sessions, spec.reps, draw.seed, info,
                                  opts);
}

std::vector<sim::AudioClip> simulate_domain(const DomainSpec& spec, std::uint64_t data_seed,
                                            std::span<const sim::KinematicProfile> profiles) {
  const auto draws = draw_subjects(spec, data_seed);
  std::vector<std::vector<sim::AudioClip>> per_subject(draws.size());
  parallel_for(draws.size(),
               [&](std::size_t i) { per_subject[i] = simulate_subject(spec, draws[i], profiles); });
  std::vector<sim::AudioClip> clips;
  for (auto& v : per_subject) {
    for (auto& c : v) clips.push_back(std::move(c));
  }
  return clips;
}

std::vector<dsp::SampleWindow> featurize_clip(const sim::AudioClip& clip, std::size_t pool_bins) {
  const auto spec = dsp::stft(clip);
  std::vector<dsp::SampleWindow> out;
  for (auto& w : dsp::slice_windows(spec, clip.annotations, clip.info)) {
    out.push_back(dsp::instance_normalize(dsp::pool_bins(w, pool_bins)));
  }
  return out;
}

std::vector<dsp::SampleWindow> featurize(const std::vector<sim::AudioClip>& clips,
                                         std::size_t pool_bins) {
  std::vector<std::vector<dsp::SampleWindow>> per_clip(clips.size());
  parallel_for(clips.size(), [&](std::size_t i) { per_clip[i] = featurize_clip(clips[i], pool_bins); });
  std::vector<dsp::SampleWindow> out;
  for (auto& v : per_clip) {
    for (auto& w : v) out.push_back(std::move(w));
  }
  return out;
}

std::vector<dsp::SampleWindow> domain_windows(const DomainSpec& spec, std::uint64_t data_seed,
                                              std::span<const sim::KinematicProfile> profiles,
                                              std::size_t pool_bins) {
  const auto draws = draw_subjects(spec, data_seed);
  std::vector<std::vector<dsp::SampleWindow>> per_subject(draws.size());
  parallel_for(draws.size(), [&](std::size_t i) {
    for (const auto& clip : simulate_subject(spec, draws[i], profiles)) {
      auto w = featurize_clip(clip, pool_bins);
      per_subject[i].insert(per_subject[i].end(), std::make_move_iterator(w.begin()),
                            std::make_move_iterator(w.end()));
    }
  });
  std::vector<dsp::SampleWindow> out;
  for (auto& v : per_subject) {
    for (auto& w : v) out.push_back(std::move(w));
  }
  return out;
}

PreparedData split_windows(std::vector<dsp::SampleWindow> lab,
                           std::vector<dsp::SampleWindow> uncontrolled, const DataConfig& cfg,
                           const std::map<int, data::SessionAssignment>* saved) {
  const int first_holdout = cfg.lab.sessions - cfg.lab.holdout_sessions;
  std::vector<dsp::SampleWindow> train, holdout;
  for (auto& w : lab) {
    (w.session >= first_holdout ? holdout : train).push_back(std::move(w));
  }
  PreparedData out;
  out.split = saved ? data::apply_split(std::move(train), std::move(uncontrolled), *saved, cfg.seed)
                    : data::make_split(std::move(train), std::move(uncontrolled), cfg.seed);
  out.lab_holdout = data::WindowPool(std::move(holdout));
  return out;
}

PreparedData prepare_data(const DataConfig& cfg) {
  const auto profiles = sim::load_profiles(sim::default_profiles_path());
  auto lab = domain_windows(cfg.lab, cfg.seed, profiles, cfg.pool_bins);
  auto unc = domain_windows(cfg.uncontrolled, cfg.seed, profiles, cfg.pool_bins);
  return split_windows(std::move(lab), std::move(unc), cfg);
}

nn::Tensor image_batch(const data::WindowPool& pool, const std::vector<std::size_t>& indices) {
  require(!indices.empty(), "image_batch: no windows");
  const std::size_t T = pool[indices[0]].frames, B = pool[indices[0]].bins;
  nn::Array out({indices.size(), 1, T, B});
  double* dst = out.data();
  for (std::size_t i : indices) {
    const auto& w = pool[i];
    require(w.frames == T && w.bins == B, "image_batch: windows differ in shape");
    dst = std::copy(w.values.begin(), w.values.end(), dst);
  }
  return nn::Tensor::constant(std::move(out));
}

nn::Tensor sequence_batch(const data::WindowPool& pool, const std::vector<std::size_t>& indices) {
  require(!indices.empty(), "sequence_batch: no windows");
  const std::size_t N = indices.size();
  const std::size_t T = pool[indices[0]].frames, B = pool[indices[0]].bins;
  nn::Array out({T * N, B});
  for (std::size_t n = 0; n < N; ++n) {
    const auto& w = pool[indices[n]];
    require(w.frames == T && w.bins == B, "sequence_batch: windows differ in shape");
    for (std::size_t t = 0; t < T; ++t) {
      std::copy_n(w.values.begin() + t * B, B, out.data() + (t * N + n) * B);
    }
  }
  return nn::Tensor::constant(std::move(out));
}

}  // namespace sonarfit::harness
