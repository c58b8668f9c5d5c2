// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pose_io/layout.hpp"

namespace mgc {

/// One 2D keypoint in original image pixels. Missing detections keep their
/// slot with conf == 0.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double conf = 0.0;

  bool operator==(const Keypoint&) const = default;
};

struct SkeletonClip {
  std::string clip_id;
  std::string subject_id;
  int label_id = 0;
  int num_frames = 0;
  int num_joints = 0;
  std::vector<Keypoint> keypoints;  // frame-major, num_frames * num_joints

  std::span<const Keypoint> frame(int t) const {
    return {keypoints.data() + static_cast<std::size_t>(t) * num_joints,
            static_cast<std::size_t>(num_joints)};
  }
  std::span<Keypoint> frame(int t) {
    return {keypoints.data() + static_cast<std::size_t>(t) * num_joints,
            static_cast<std::size_t>(num_joints)};
  }

  bool operator==(const SkeletonClip&) const = default;
};

struct LabelVocabulary {
  std::vector<std::string> id_to_text;

  int size() const { return static_cast<int>(id_to_text.size()); }
  /// Fingerprint of the label texts in id order; stamped into score files so
  /// ensembles refuse to mix runs over different vocabularies.
  std::uint64_t fingerprint() const;

  bool operator==(const LabelVocabulary&) const = default;
};

enum class Split { Train, Val, Test };

Split parse_split(std::string_view name);
std::string_view split_name(Split s);

/// Subject ids per split (cross-subject protocol).
struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  const std::vector<std::string>& subjects(Split s) const;
  bool operator==(const SplitAssignment&) const = default;
};

struct DatasetManifest {
  KeypointLayout layout;
  LabelVocabulary vocab;
  SplitAssignment splits;
  std::vector<SkeletonClip> clips;

  /// Checks every invariant; the first violation throws Validation naming the
  /// offending clip or subject.
  void validate() const;

  /// Indices into `clips` whose subject belongs to split `s`, in file order.
  std::vector<std::size_t> clip_indices(Split s) const;

  bool operator==(const DatasetManifest&) const = default;
};

inline constexpr int kManifestSchema = 1;

DatasetManifest parse_manifest(std::string_view text);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string serialize_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Validates a single clip against a layout and class count.
void validate_clip(const SkeletonClip& clip, const KeypointLayout& layout, int n_classes);

}  // namespace mgc
