// SPDX-License-Identifier: Apache-2.0
#include "pose_io/layout.hpp"

#include <algorithm>
#include <set>

#include "common/error.hpp"

namespace mgc {

void KeypointLayout::validate() const {
  const int k = joint_count();
  require(k >= 2, ErrorKind::Validation,
          "layout '" + name + "': needs at least 2 joints, got " + std::to_string(k));
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : limb_pairs) {
    require(a >= 0 && a < k && b >= 0 && b < k, ErrorKind::Validation,
            "layout '" + name + "': limb (" + std::to_string(a) + ", " +
                std::to_string(b) + ") references a joint >= K=" + std::to_string(k));
    const auto key = std::minmax(a, b);
    require(seen.insert(key).second, ErrorKind::Validation,
            "layout '" + name + "': duplicate limb (" + std::to_string(a) + ", " +
                std::to_string(b) + ")");
  }
}

namespace {

KeypointLayout upper22() {
  KeypointLayout l;
  l.name = "openpose_upper22";
  l.joint_names = {"nose",        "neck",        "r_shoulder",  "r_elbow",
                   "r_wrist",     "l_shoulder",  "l_elbow",     "l_wrist",
                   "r_eye",       "l_eye",       "r_ear",       "l_ear",
                   "r_thumb_tip", "r_index_tip", "r_middle_tip", "r_ring_tip",
                   "r_pinky_tip", "l_thumb_tip", "l_index_tip", "l_middle_tip",
                   "l_ring_tip",  "l_pinky_tip"};
  l.limb_pairs = {{0, 1},  {1, 2},  {2, 3},  {3, 4},  {1, 5},  {5, 6},  {6, 7},
                  {0, 8},  {0, 9},  {8, 10}, {9, 11}, {4, 12}, {4, 13}, {4, 14},
                  {4, 15}, {4, 16}, {7, 17}, {7, 18}, {7, 19}, {7, 20}, {7, 21}};
  return l;
}

KeypointLayout body25() {
  KeypointLayout l;
  l.name = "openpose_body25";
  l.joint_names = {"nose",       "neck",        "r_shoulder", "r_elbow",
                   "r_wrist",    "l_shoulder",  "l_elbow",    "l_wrist",
                   "mid_hip",    "r_hip",       "r_knee",     "r_ankle",
                   "l_hip",      "l_knee",      "l_ankle",    "r_eye",
                   "l_eye",      "r_ear",       "l_ear",      "l_big_toe",
                   "l_small_toe", "l_heel",     "r_big_toe",  "r_small_toe",
                   "r_heel"};
  l.limb_pairs = {{1, 8},   {1, 2},   {1, 5},   {2, 3},   {3, 4},   {5, 6},
                  {6, 7},   {8, 9},   {9, 10},  {10, 11}, {8, 12},  {12, 13},
                  {13, 14}, {1, 0},   {0, 15},  {15, 17}, {0, 16},  {16, 18},
                  {14, 19}, {19, 20}, {14, 21}, {11, 22}, {22, 23}, {11, 24}};
  return l;
}

KeypointLayout toy5() {
  KeypointLayout l;
  l.name = "toy5";
  l.joint_names = {"head", "neck", "r_hand", "l_hand", "hip"};
  l.limb_pairs = {{0, 1}, {1, 2}, {1, 3}, {1, 4}};
  return l;
}

}  // namespace

KeypointLayout builtin_layout(std::string_view name) {
  if (name == "openpose_upper22") return upper22();
  if (name == "openpose_body25") return body25();
  if (name == "toy5") return toy5();
  fail(ErrorKind::InvalidArgument, "unknown layout '" + std::string(name) + "'");
}

std::vector<std::string> builtin_layout_names() {
  return {"openpose_upper22", "openpose_body25", "toy5"};
}

}  // namespace mgc
