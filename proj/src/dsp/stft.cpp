#include "sonarfit/dsp/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "sonarfit/error.hpp"

namespace sonarfit::dsp {
namespace {

// FFTW's planner is not reentrant; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffers {
  explicit FftwBuffers(std::size_t n)
      : in(fftw_alloc_real(n)), out(fftw_alloc_complex(n / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~FftwBuffers() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
  }
  FftwBuffers(const FftwBuffers&) = delete;
  FftwBuffers& operator=(const FftwBuffers&) = delete;

  double* in;
  fftw_complex* out;
  fftw_plan plan{};
};

}  // namespace

void StftConfig::validate() const {
  require(window_len >= 2, "stft: window_len must be >= 2");
  require(window_len <= fft_len, "stft: window_len must not exceed fft_len");
  require(hop >= 1 && hop < window_len, "stft: hop must be in [1, window_len)");
  require(sample_rate_hz > 0.0, "stft: sample rate must be positive");
  const double nyquist = sample_rate_hz / 2.0;
  require(band_low_hz >= 0.0 && band_low_hz < band_high_hz && band_high_hz <= nyquist,
          "stft: band must satisfy 0 <= low < high <= Nyquist");
  require(first_fft_bin() < end_fft_bin(), "stft: band contains no FFT bin");
}

std::size_t StftConfig::first_fft_bin() const {
  return static_cast<std::size_t>(std::ceil(band_low_hz / grid_spacing_hz() - 1e-9));
}

std::size_t StftConfig::end_fft_bin() const {
  const auto last = static_cast<std::size_t>(std::floor(band_high_hz / grid_spacing_hz() + 1e-9));
  return std::min(last, fft_len / 2) + 1;
}

std::vector<double> analysis_window(const StftConfig& cfg) {
  std::vector<double> w(cfg.window_len, 1.0);
  if (cfg.window_fn == WindowFunction::Hann) {
    const double n = static_cast<double>(cfg.window_len);
    for (std::size_t i = 0; i < cfg.window_len; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
    }
  }
  return w;
}

Spectrogram stft(std::span<const float> samples, const StftConfig& cfg) {
  cfg.validate();
  require(samples.size() >= cfg.window_len,
          "stft: clip shorter than one analysis window (" + std::to_string(samples.size()) +
              " < " + std::to_string(cfg.window_len) + " samples)");

  Spectrogram spec;
  spec.frames = 1 + (samples.size() - cfg.window_len) / cfg.hop;
  spec.first_fft_bin = cfg.first_fft_bin();
  spec.bins = cfg.end_fft_bin() - spec.first_fft_bin;
  spec.sample_rate_hz = cfg.sample_rate_hz;
  spec.hop = cfg.hop;
  spec.frame_period_s = cfg.frame_period_s();
  spec.analysis_resolution_hz = cfg.analysis_resolution_hz();
  spec.grid_spacing_hz = cfg.grid_spacing_hz();
  spec.band_low_hz = cfg.band_low_hz;
  spec.band_high_hz = cfg.band_high_hz;
  spec.db_floor = cfg.db_floor;
  const auto carrier_fft = std::lround(sim::kCarrierHz / spec.grid_spacing_hz);
  const auto carrier_col = carrier_fft - static_cast<long>(spec.first_fft_bin);
  spec.carrier_bin = (carrier_col >= 0 && carrier_col < static_cast<long>(spec.bins)) ? carrier_col : -1;
  spec.values.resize(spec.frames * spec.bins);

  const std::vector<double> window = analysis_window(cfg);
  double window_sum = 0.0;
  for (double w : window) window_sum += w;
  // Scale so a unit sinusoid centered on a bin reads |X| = 1.
  const double norm = 2.0 / window_sum;

  FftwBuffers fft(cfg.fft_len);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const std::size_t offset = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.window_len; ++i) {
      fft.in[i] = window[i] * static_cast<double>(samples[offset + i]);
    }
    for (std::size_t i = cfg.window_len; i < cfg.fft_len; ++i) fft.in[i] = 0.0;
    fftw_execute(fft.plan);
    float* row = spec.values.data() + t * spec.bins;
    for (std::size_t b = 0; b < spec.bins; ++b) {
      const auto& c = fft.out[spec.first_fft_bin + b];
      const double mag = std::hypot(c[0], c[1]) * norm;
      const double db = mag > 0.0 ? 20.0 * std::log10(mag) : cfg.db_floor;
      row[b] = static_cast<float>(std::max(db, cfg.db_floor));
    }
  }
  return spec;
}

Spectrogram stft(const sim::AudioClip& clip, const StftConfig& cfg) {
  require(std::abs(clip.sample_rate_hz - cfg.sample_rate_hz) < 1e-9,
          "stft: clip sample rate does not match configuration");
  return stft(std::span<const float>(clip.samples), cfg);
}

}  // namespace sonarfit::dsp
