// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "pose_io/manifest.hpp"

namespace mgc {

struct SynthOptions {
  /// When false every subject goes to the train split (overfit checks).
  bool holdout = true;
  double canvas_width = 640.0;
  double canvas_height = 480.0;
  int min_frames = 20;
  int max_frames = 32;
};

/// Deterministic stand-in dataset. Clip i has label i % n_classes and subject
/// "s<i / n_classes>", so every subject carries one clip per class. Each class
/// moves its own joint along a class-specific direction and frequency, which
/// keeps classes separable after cropping. Coordinates are multiples of 1/64
/// px and confidences multiples of 1/256 so they round-trip exactly.
///
/// Split rule: 1 subject -> train; 2 -> train/test; >= 3 -> last subject is
/// test, second-to-last is val, rest train. `holdout = false` puts all in train.
DatasetManifest synthesize_dataset(int n_clips, int n_classes,
                                   const KeypointLayout& layout, std::uint64_t seed,
                                   const SynthOptions& options = {});

/// Label texts used for synthetic vocabularies (micro-gesture style names).
std::vector<std::string> synthetic_label_texts(int n_classes);

}  // namespace mgc
