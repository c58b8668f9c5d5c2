// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mgc {

/// Per-clip class scores of one evaluation run.
///
/// File layout (little-endian):
///   4 bytes  magic "MGSC"
///   u32      version (1)
///   u32      M (rows / clips)
///   u32      N (classes)
///   u64      vocab fingerprint
///   u64      clip-order fingerprint (clip ids in row order)
///   M x i32  true labels
///   M*N f32  scores, row-major
struct ScoreMatrix {
  int rows = 0;
  int classes = 0;
  std::uint64_t vocab_hash = 0;
  std::uint64_t clips_hash = 0;
  std::vector<int> labels;
  std::vector<float> scores;

  bool operator==(const ScoreMatrix&) const = default;
};

void write_scores(const ScoreMatrix& s, const std::filesystem::path& path);
ScoreMatrix read_scores(const std::filesystem::path& path);

/// Throws ShapeMismatch/Validation unless the two files describe the same
/// clips over the same vocabulary.
void check_fusable(const ScoreMatrix& a, const ScoreMatrix& b);

}  // namespace mgc
