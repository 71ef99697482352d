#pragma once

#include <filesystem>
#include <vector>

#include "sonarfit/dsp/windows.hpp"

namespace sonarfit::dsp {

inline constexpr std::uint32_t kWindowFormatVersion = 1;

/// `<stem>.sfwd`: "SFWD", u32 version, u64 n_windows, u64 frames, u64 bins,
/// then little-endian float32 values window by window. `<stem>.jsonl` holds
/// one manifest line per window (index, label, domain, subject, session).
/// All windows must share one shape.
void write_windows(const std::vector<SampleWindow>& windows, const std::filesystem::path& stem);
std::vector<SampleWindow> read_windows(const std::filesystem::path& stem);

}  // namespace sonarfit::dsp
