// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

#include "common/error.hpp"
#include "pose_io/layout.hpp"
#include "pose_io/manifest.hpp"

namespace testutil {

// Fresh scratch directory under $MGC_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch(const std::string& name) {
  const char* env = std::getenv("MGC_TEST_TMP");
  const auto root = env && *env ? std::filesystem::path(env)
                                : std::filesystem::temp_directory_path() / "mgc_tests";
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Clip of T frames over layout K with keypoint k at (x0 + 10k + t, y0 + 5k).
inline mgc::SkeletonClip toy_clip(const std::string& id, const std::string& subject, int label,
                                  int frames, int joints, double x0 = 100.0, double y0 = 50.0) {
  mgc::SkeletonClip c;
  c.clip_id = id;
  c.subject_id = subject;
  c.label_id = label;
  c.num_frames = frames;
  c.num_joints = joints;
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < joints; ++k) {
      c.keypoints.push_back({x0 + 10.0 * k + t, y0 + 5.0 * k, 1.0});
    }
  }
  return c;
}

inline mgc::DatasetManifest toy_manifest() {
  mgc::DatasetManifest m;
  m.layout = mgc::builtin_layout("toy5");
  m.vocab.id_to_text = {"touching head", "folding arms"};
  m.splits.train = {"s1"};
  m.splits.test = {"s2"};
  m.clips.push_back(toy_clip("c1", "s1", 0, 3, 5));
  m.clips.push_back(toy_clip("c2", "s2", 1, 2, 5));
  return m;
}

template <typename F>
mgc::ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const mgc::Error& e) {
    return e.kind();
  }
  FAIL("expected an mgc::Error");
  return mgc::ErrorKind::Runtime;
}

template <typename F>
std::string error_message_of(F&& f) {
  try {
    f();
  } catch (const mgc::Error& e) {
    return e.what();
  }
  FAIL("expected an mgc::Error");
  return {};
}

}  // namespace testutil
