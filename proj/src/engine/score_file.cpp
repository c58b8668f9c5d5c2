// SPDX-License-Identifier: Apache-2.0
#include "engine/score_file.hpp"

#include <cstring>
#include <fstream>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace mgc {

namespace {
constexpr char kMagic[4] = {'M', 'G', 'S', 'C'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_scores(const ScoreMatrix& s, const std::filesystem::path& path) {
  require(s.labels.size() == static_cast<std::size_t>(s.rows) &&
              s.scores.size() == static_cast<std::size_t>(s.rows) * s.classes,
          ErrorKind::ShapeMismatch, "score matrix sizes are inconsistent");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out.write(kMagic, 4);
  binio::write_pod<std::uint32_t>(out, kVersion);
  binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.rows));
  binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.classes));
  binio::write_pod<std::uint64_t>(out, s.vocab_hash);
  binio::write_pod<std::uint64_t>(out, s.clips_hash);
  for (int y : s.labels) binio::write_pod<std::int32_t>(out, y);
  binio::write_f32(out, s.scores);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

ScoreMatrix read_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open score file " + path.string());
  char magic[4];
  in.read(magic, 4);
  require(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0, ErrorKind::Parse,
          path.string() + ": not a score file");
  const auto version = binio::read_pod<std::uint32_t>(in, "score header");
  require(version == kVersion, ErrorKind::Parse, path.string() + ": unsupported score file version");
  ScoreMatrix s;
  s.rows = static_cast<int>(binio::read_pod<std::uint32_t>(in, "score header"));
  s.classes = static_cast<int>(binio::read_pod<std::uint32_t>(in, "score header"));
  s.vocab_hash = binio::read_pod<std::uint64_t>(in, "score header");
  s.clips_hash = binio::read_pod<std::uint64_t>(in, "score header");
  s.labels.resize(s.rows);
  for (auto& y : s.labels) y = binio::read_pod<std::int32_t>(in, "score labels");
  s.scores.resize(static_cast<std::size_t>(s.rows) * s.classes);
  binio::read_f32(in, s.scores, "score data");
  return s;
}

void check_fusable(const ScoreMatrix& a, const ScoreMatrix& b) {
  require(a.rows == b.rows && a.classes == b.classes, ErrorKind::ShapeMismatch,
          "score files differ in shape (" + std::to_string(a.rows) + "x" + std::to_string(a.classes) +
              " vs " + std::to_string(b.rows) + "x" + std::to_string(b.classes) + ")");
  require(a.vocab_hash == b.vocab_hash, ErrorKind::Validation, "score files use different vocabularies");
  require(a.clips_hash == b.clips_hash && a.labels == b.labels, ErrorKind::Validation,
          "score files cover different clips or clip order");
}

}  // namespace mgc
