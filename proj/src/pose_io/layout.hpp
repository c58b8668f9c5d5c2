// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mgc {

/// Named keypoint topology: joint names plus the (a, b) joint pairs that form
/// limbs for the limb heatmap modality.
struct KeypointLayout {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<std::pair<int, int>> limb_pairs;

  int joint_count() const { return static_cast<int>(joint_names.size()); }
  int limb_count() const { return static_cast<int>(limb_pairs.size()); }

  /// Throws Validation if K < 2, a limb index is out of range, or a pair is
  /// repeated (in either orientation).
  void validate() const;

  bool operator==(const KeypointLayout&) const = default;
};

/// Built-in layouts:
///   "openpose_upper22"  22-joint upper body (12 OpenPose BODY_25 upper-body
///                       points plus 5 fingertips per hand; our convention)
///   "openpose_body25"   OpenPose BODY_25 whole body
///   "toy5"              5-joint stick figure for tests
KeypointLayout builtin_layout(std::string_view name);
std::vector<std::string> builtin_layout_names();

}  // namespace mgc
