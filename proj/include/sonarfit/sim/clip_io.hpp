#pragma once

#include <filesystem>

#include "sonarfit/sim/synth.hpp"

namespace sonarfit::sim {

inline constexpr std::uint32_t kClipFormatVersion = 1;

/// Writes `<stem>.sfit` (16-byte header "SFIT", u32 version, u64 sample
/// count, then little-endian float32 samples) and `<stem>.jsonl` with one
/// annotation segment per line.
void write_clip(const AudioClip& clip, const std::filesystem::path& stem);

/// Reads a clip written by write_clip; `stem` may carry either extension.
AudioClip read_clip(const std::filesystem::path& stem);

}  // namespace sonarfit::sim
