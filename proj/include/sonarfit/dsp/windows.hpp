#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sonarfit/dsp/stft.hpp"

namespace sonarfit::dsp {

inline constexpr std::size_t kWindowFrames = 129;  // 6 s at 46.44 ms per frame
inline constexpr std::size_t kWindowStride = 64;   // 50 % overlap, floored
inline constexpr double kLabelCoverage = 0.6;
inline constexpr double kNormEpsilon = 1e-5;

/// One labeled 6 s slice of a spectrogram (row-major frames x bins, dB).
struct SampleWindow {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> values;
  int label = sim::kNoneClass;
  std::string domain;
  int subject = 0;
  int session = 0;

  float at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
};

/// floor((n_frames - 129) / 64) + 1, or 0 when shorter than one window.
std::size_t window_count(std::size_t n_frames);

/// Frame whose start time is closest below `t_s`: floor(t * fs / hop).
std::size_t frame_of_time(double t_s, const Spectrogram& spec);

/// Per-frame class, none-class where no annotation covers the frame start.
std::vector<int> frame_labels(const Spectrogram& spec, std::span<const sim::Segment> annotations);

/// Windows start every 64 frames; a window takes the class covering at least
/// 60 % of its frames, otherwise the none-class.
std::vector<SampleWindow> slice_windows(const Spectrogram& spec,
                                        std::span<const sim::Segment> annotations,
                                        const sim::ClipInfo& info = {});

/// (x - mean) / sqrt(var + 1e-5) over all cells of the window.
SampleWindow instance_normalize(const SampleWindow& w);

/// Averages groups of `factor` adjacent frequency bins (dB domain); a trailing
/// partial group is averaged over the bins it has. Used for reduced-size
/// model inputs; factor 1 returns the window unchanged.
SampleWindow pool_bins(const SampleWindow& w, std::size_t factor);

}  // namespace sonarfit::dsp
