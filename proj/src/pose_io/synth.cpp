// SPDX-License-Identifier: Apache-2.0
#include "pose_io/synth.hpp"

#include <cmath>
#include <numbers>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace mgc {

namespace {

constexpr const char* kGestureNames[] = {
    "touching head",    "folding arms",     "scratching neck",  "rubbing hands",
    "touching nose",    "crossing fingers", "shaking head",     "nodding",
    "touching ear",     "biting nails",     "adjusting hair",   "rubbing eyes",
    "touching jaw",     "moving torso",     "shrugging shoulders", "covering face",
    "arms akimbo",      "non-MG",
};

double quantize(double v, double step) { return std::round(v / step) * step; }

}  // namespace

std::vector<std::string> synthetic_label_texts(int n_classes) {
  std::vector<std::string> out;
  constexpr int kNamed = static_cast<int>(std::size(kGestureNames));
  for (int c = 0; c < n_classes; ++c) {
    if (c < kNamed) {
      out.emplace_back(kGestureNames[c]);
    } else {
      out.push_back("gesture variant " + std::to_string(c));
    }
  }
  return out;
}

DatasetManifest synthesize_dataset(int n_clips, int n_classes, const KeypointLayout& layout,
                                   std::uint64_t seed, const SynthOptions& options) {
  require(n_classes >= 2, ErrorKind::InvalidArgument, "synth: n_classes must be >= 2");
  require(n_clips >= n_classes, ErrorKind::InvalidArgument,
          "synth: n_clips (" + std::to_string(n_clips) + ") must be >= n_classes (" +
              std::to_string(n_classes) + ")");
  require(options.min_frames >= 1 && options.max_frames >= options.min_frames,
          ErrorKind::InvalidArgument, "synth: bad frame range");
  layout.validate();

  DatasetManifest m;
  m.layout = layout;
  m.vocab.id_to_text = synthetic_label_texts(n_classes);

  const int k = layout.joint_count();
  const int n_subjects = (n_clips + n_classes - 1) / n_classes;
  for (int s = 0; s < n_subjects; ++s) {
    const auto id = "s" + std::to_string(s);
    if (!options.holdout || n_subjects == 1) {
      m.splits.train.push_back(id);
    } else if (s == n_subjects - 1) {
      m.splits.test.push_back(id);
    } else if (n_subjects >= 3 && s == n_subjects - 2) {
      m.splits.val.push_back(id);
    } else {
      m.splits.train.push_back(id);
    }
  }

  // Template pose: joints spread on an ellipse around the body center.
  std::vector<std::pair<double, double>> base(k);
  for (int j = 0; j < k; ++j) {
    const double a = 2.0 * std::numbers::pi * j / k;
    base[j] = {80.0 * std::cos(a), 100.0 * std::sin(a)};
  }

  for (int i = 0; i < n_clips; ++i) {
    Rng rng(derive_seed(seed, {0x5e17, static_cast<std::uint64_t>(i)}));
    SkeletonClip clip;
    clip.clip_id = "clip" + std::to_string(i);
    clip.label_id = i % n_classes;
    clip.subject_id = "s" + std::to_string(i / n_classes);
    clip.num_joints = k;
    clip.num_frames = options.min_frames +
                      static_cast<int>(rng.below(
                          static_cast<std::uint64_t>(options.max_frames - options.min_frames + 1)));

    const int c = clip.label_id;
    const int moving = c % k;
    const int pattern = c / k;
    // Direction cycles through 4 orientations; frequency grows with pattern.
    const double dir = std::numbers::pi * 0.25 * (pattern % 4);
    const double freq = 1.0 + 0.5 * (pattern / 4);
    const double dx = std::cos(dir);
    const double dy = std::sin(dir);

    const double cx = rng.uniform(0.3, 0.7) * options.canvas_width;
    const double cy = rng.uniform(0.3, 0.7) * options.canvas_height;
    const double scale = rng.uniform(0.8, 1.2);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    clip.keypoints.resize(static_cast<std::size_t>(clip.num_frames) * k);
    for (int t = 0; t < clip.num_frames; ++t) {
      const double tau = static_cast<double>(t) / clip.num_frames;
      const double swing = std::sin(2.0 * std::numbers::pi * freq * tau + phase);
      auto frame = clip.frame(t);
      for (int j = 0; j < k; ++j) {
        double x = base[j].first;
        double y = base[j].second;
        if (j == moving) {
          x += dx * (25.0 + 40.0 * swing);
          y += dy * (25.0 + 40.0 * swing);
        }
        x = cx + scale * x + rng.uniform(-2.0, 2.0);
        y = cy + scale * y + rng.uniform(-2.0, 2.0);
        double conf = rng.uniform(0.6, 1.0);
        if (j != moving && rng.uniform() < 0.02) conf = 0.0;
        frame[j] = {quantize(x, 1.0 / 64), quantize(y, 1.0 / 64), quantize(conf, 1.0 / 256)};
      }
    }
    m.clips.push_back(std::move(clip));
  }
  m.validate();
  return m;
}

}  // namespace mgc
