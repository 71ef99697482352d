#include "sonarfit/dsp/window_io.hpp"

#include <fstream>

#include "json.hpp"
#include "sonarfit/binary_io.hpp"

namespace sonarfit::dsp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path with_ext(fs::path stem, const char* ext) {
  if (stem.extension() == ".sfwd" || stem.extension() == ".jsonl") stem.replace_extension();
  stem += ext;
  return stem;
}

}  // namespace

void write_windows(const std::vector<SampleWindow>& windows, const fs::path& stem) {
  const std::size_t frames = windows.empty() ? 0 : windows.front().frames;
  const std::size_t bins = windows.empty() ? 0 : windows.front().bins;
  for (const auto& w : windows) {
    require(w.frames == frames && w.bins == bins && w.values.size() == frames * bins,
            "write_windows: windows differ in shape");
  }
  const fs::path blob = with_ext(stem, ".sfwd");
  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + blob.string());
  io::write_magic(out, "SFWD");
  io::write_le<std::uint32_t>(out, kWindowFormatVersion);
  io::write_le<std::uint64_t>(out, windows.size());
  io::write_le<std::uint64_t>(out, frames);
  io::write_le<std::uint64_t>(out, bins);
  for (const auto& w : windows) io::write_f32_array(out, w.values);
  if (!out) fail(ErrorKind::Io, "write failed for " + blob.string());

  const fs::path manifest = with_ext(stem, ".jsonl");
  std::ofstream side(manifest, std::ios::trunc);
  if (!side) fail(ErrorKind::Io, "cannot write " + manifest.string());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    side << json{{"index", i},
                 {"label", w.label},
                 {"domain", w.domain},
                 {"subject", w.subject},
                 {"session", w.session}}
                .dump()
         << '\n';
  }
  if (!side) fail(ErrorKind::Io, "write failed for " + manifest.string());
}

std::vector<SampleWindow> read_windows(const fs::path& stem) {
  const fs::path blob = with_ext(stem, ".sfwd");
  std::ifstream in(blob, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + blob.string());
  io::expect_magic(in, "SFWD", blob.string());
  const auto version = io::read_le<std::uint32_t>(in, blob.string());
  if (version != kWindowFormatVersion) {
    fail(ErrorKind::Io, blob.string() + ": unsupported version " + std::to_string(version));
  }
  const auto n = io::read_le<std::uint64_t>(in, blob.string());
  const auto frames = io::read_le<std::uint64_t>(in, blob.string());
  const auto bins = io::read_le<std::uint64_t>(in, blob.string());

  std::vector<SampleWindow> windows(n);
  for (auto& w : windows) {
    w.frames = frames;
    w.bins = bins;
    w.values.resize(frames * bins);
    io::read_f32_array(in, w.values, blob.string());
  }

  const fs::path manifest = with_ext(stem, ".jsonl");
  std::ifstream side(manifest);
  if (!side) fail(ErrorKind::Io, "cannot open " + manifest.string());
  std::string line;
  std::size_t seen = 0;
  while (std::getline(side, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto index = j.at("index").get<std::size_t>();
      if (index >= n) fail(ErrorKind::Io, manifest.string() + ": index out of range");
      auto& w = windows[index];
      w.label = j.at("label").get<int>();
      w.domain = j.at("domain").get<std::string>();
      w.subject = j.at("subject").get<int>();
      w.session = j.at("session").get<int>();
      ++seen;
    } catch (const json::exception& e) {
      fail(ErrorKind::Io, manifest.string() + ": " + e.what());
    }
  }
  if (seen != n) fail(ErrorKind::Io, manifest.string() + ": manifest does not cover every window");
  return windows;
}

}  // namespace sonarfit::dsp
