#include "sonarfit/sim/clip_io.hpp"

#include <fstream>

#include "json.hpp"
#include "sonarfit/binary_io.hpp"

namespace sonarfit::sim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path with_ext(fs::path stem, const char* ext) {
  if (stem.extension() == ".sfit" || stem.extension() == ".jsonl") stem.replace_extension();
  stem += ext;
  return stem;
}

}  // namespace

void write_clip(const AudioClip& clip, const fs::path& stem) {
  const fs::path blob = with_ext(stem, ".sfit");
  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + blob.string());
  io::write_magic(out, "SFIT");
  io::write_le<std::uint32_t>(out, kClipFormatVersion);
  io::write_le<std::uint64_t>(out, clip.samples.size());
  io::write_f32_array(out, clip.samples);
  if (!out) fail(ErrorKind::Io, "write failed for " + blob.string());

  const fs::path sidecar = with_ext(stem, ".jsonl");
  std::ofstream side(sidecar, std::ios::trunc);
  if (!side) fail(ErrorKind::Io, "cannot write " + sidecar.string());
  for (const auto& seg : clip.annotations) {
    json line = {{"start_s", seg.start_s},        {"end_s", seg.end_s},
                 {"class_id", seg.class_id},      {"subject", clip.info.subject},
                 {"domain", clip.info.domain},    {"session", clip.info.session}};
    side << line.dump() << '\n';
  }
  if (!side) fail(ErrorKind::Io, "write failed for " + sidecar.string());
}

AudioClip read_clip(const fs::path& stem) {
  const fs::path blob = with_ext(stem, ".sfit");
  std::ifstream in(blob, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + blob.string());
  io::expect_magic(in, "SFIT", blob.string());
  const auto version = io::read_le<std::uint32_t>(in, blob.string());
  if (version != kClipFormatVersion) {
    fail(ErrorKind::Io, blob.string() + ": unsupported version " + std::to_string(version));
  }
  const auto count = io::read_le<std::uint64_t>(in, blob.string());
  AudioClip clip;
  clip.samples.resize(count);
  io::read_f32_array(in, clip.samples, blob.string());

  const fs::path sidecar = with_ext(stem, ".jsonl");
  std::ifstream side(sidecar);
  if (!side) fail(ErrorKind::Io, "cannot open " + sidecar.string());
  std::string line;
  bool first = true;
  while (std::getline(side, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      clip.annotations.push_back(
          {j.at("start_s").get<double>(), j.at("end_s").get<double>(), j.at("class_id").get<int>()});
      if (first) {
        clip.info = {j.at("subject").get<int>(), j.at("domain").get<std::string>(),
                     j.at("session").get<int>()};
        first = false;
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::Io, sidecar.string() + ": " + e.what());
    }
  }
  return clip;
}

}  // namespace sonarfit::sim
