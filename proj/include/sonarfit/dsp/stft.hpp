#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sonarfit/sim/synth.hpp"

namespace sonarfit::dsp {

enum class WindowFunction { Hann, Rectangular };

struct StftConfig {
  std::size_t window_len = 12250;  // 44100 / 12250 = 3.6 Hz analysis resolution
  std::size_t hop = 2048;          // 46.44 ms frame period
  std::size_t fft_len = 16384;     // zero padded; 2.6916 Hz grid spacing
  WindowFunction window_fn = WindowFunction::Hann;
  double band_low_hz = 19500.0;
  double band_high_hz = 20500.0;
  double sample_rate_hz = sim::kSampleRateHz;
  double db_floor = -120.0;

  void validate() const;

  double analysis_resolution_hz() const { return sample_rate_hz / static_cast<double>(window_len); }
  double grid_spacing_hz() const { return sample_rate_hz / static_cast<double>(fft_len); }
  double frame_period_s() const { return static_cast<double>(hop) / sample_rate_hz; }
  /// First and one-past-last FFT bins whose centers lie inside the band.
  std::size_t first_fft_bin() const;
  std::size_t end_fft_bin() const;
};

/// Band-cropped dB magnitudes, row-major frames x bins. A unit-amplitude
/// sinusoid centered on a bin reads 0 dB.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> values;

  double sample_rate_hz = sim::kSampleRateHz;
  std::size_t hop = 0;
  double frame_period_s = 0.0;
  double analysis_resolution_hz = 0.0;
  double grid_spacing_hz = 0.0;
  double band_low_hz = 0.0;
  double band_high_hz = 0.0;
  double db_floor = -120.0;
  std::size_t first_fft_bin = 0;  // FFT index of column 0
  long carrier_bin = -1;          // column of the carrier, -1 if outside the band

  float at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
  double bin_center_hz(std::size_t bin) const {
    return static_cast<double>(first_fft_bin + bin) * grid_spacing_hz;
  }
};

std::vector<double> analysis_window(const StftConfig& cfg);

/// Frame t covers samples [t*hop, t*hop + window_len).
Spectrogram stft(std::span<const float> samples, const StftConfig& cfg = {});
Spectrogram stft(const sim::AudioClip& clip, const StftConfig& cfg = {});

}  // namespace sonarfit::dsp
