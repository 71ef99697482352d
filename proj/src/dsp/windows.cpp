#include "sonarfit/dsp/windows.hpp"

#include <array>
#include <cmath>

#include "sonarfit/error.hpp"

namespace sonarfit::dsp {

std::size_t window_count(std::size_t n_frames) {
  if (n_frames < kWindowFrames) return 0;
  return (n_frames - kWindowFrames) / kWindowStride + 1;
}

std::size_t frame_of_time(double t_s, const Spectrogram& spec) {
  require(t_s >= 0.0, "frame_of_time: negative time");
  return static_cast<std::size_t>(
      std::floor(t_s * spec.sample_rate_hz / static_cast<double>(spec.hop) + 1e-9));
}

std::vector<int> frame_labels(const Spectrogram& spec, std::span<const sim::Segment> annotations) {
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& seg = annotations[i];
    require(seg.start_s <= seg.end_s, "annotations: segment ends before it starts");
    require(seg.class_id >= 0 && seg.class_id < sim::kNumClasses,
            "annotations: class_id outside 0..8");
    if (i > 0) {
      require(annotations[i - 1].end_s <= seg.start_s + 1e-9,
              "annotations: segments overlap or are out of order");
    }
  }
  std::vector<int> labels(spec.frames, sim::kNoneClass);
  std::size_t seg = 0;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const double time = static_cast<double>(t * spec.hop) / spec.sample_rate_hz;
    while (seg < annotations.size() && annotations[seg].end_s <= time) ++seg;
    if (seg < annotations.size() && annotations[seg].start_s <= time) {
      labels[t] = annotations[seg].class_id;
    }
  }
  return labels;
}

std::vector<SampleWindow> slice_windows(const Spectrogram& spec,
                                        std::span<const sim::Segment> annotations,
                                        const sim::ClipInfo& info) {
  require(spec.frames >= kWindowFrames,
          "slice_windows: spectrogram has " + std::to_string(spec.frames) +
              " frames, fewer than one 129-frame window");
  const std::vector<int> labels = frame_labels(spec, annotations);
  const std::size_t n = window_count(spec.frames);
  const auto min_frames =
      static_cast<std::size_t>(std::ceil(kLabelCoverage * static_cast<double>(kWindowFrames)));

  std::vector<SampleWindow> out;
  out.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t start = w * kWindowStride;
    std::array<std::size_t, sim::kNumClasses> counts{};
    for (std::size_t t = start; t < start + kWindowFrames; ++t) ++counts[labels[t]];
    int label = sim::kNoneClass;
    for (int c = 0; c < sim::kNumClasses; ++c) {
      if (counts[c] >= min_frames) label = c;
    }
    SampleWindow win;
    win.frames = kWindowFrames;
    win.bins = spec.bins;
    win.values.assign(spec.values.begin() + static_cast<std::ptrdiff_t>(start * spec.bins),
                      spec.values.begin() +
                          static_cast<std::ptrdiff_t>((start + kWindowFrames) * spec.bins));
    win.label = label;
    win.domain = info.domain;
    win.subject = info.subject;
    win.session = info.session;
    out.push_back(std::move(win));
  }
  return out;
}

SampleWindow instance_normalize(const SampleWindow& w) {
  SampleWindow out = w;
  if (w.values.empty()) return out;
  const double n = static_cast<double>(w.values.size());
  double mean = 0.0;
  for (float v : w.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : w.values) var += (v - mean) * (v - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + kNormEpsilon);
  for (std::size_t i = 0; i < w.values.size(); ++i) {
    out.values[i] = static_cast<float>((w.values[i] - mean) * inv_std);
  }
  return out;
}

SampleWindow pool_bins(const SampleWindow& w, std::size_t factor) {
  require(factor >= 1, "pool_bins: factor must be >= 1");
  if (factor == 1) return w;
  SampleWindow out = w;
  out.bins = (w.bins + factor - 1) / factor;
  out.values.assign(out.frames * out.bins, 0.0f);
  for (std::size_t t = 0; t < w.frames; ++t) {
    for (std::size_t g = 0; g < out.bins; ++g) {
      const std::size_t lo = g * factor;
      const std::size_t hi = std::min(lo + factor, w.bins);
      double acc = 0.0;
      for (std::size_t b = lo; b < hi; ++b) acc += w.at(t, b);
      out.values[t * out.bins + g] = static_cast<float>(acc / static_cast<double>(hi - lo));
    }
  }
  return out;
}

}  // namespace sonarfit::dsp
