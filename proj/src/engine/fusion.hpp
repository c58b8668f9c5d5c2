// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace mgc {

/// What a score file holds and therefore what gets fused.
enum class ScoreKind { Probabilities, Logits };

ScoreKind parse_score_kind(std::string_view name);
std::string_view score_kind_name(ScoreKind k);

/// Late-fusion weights for the joint and limb streams (2:3 by default).
struct FusionConfig {
  double weight_joint = 2.0;
  double weight_limb = 3.0;
  ScoreKind scores = ScoreKind::Probabilities;

  void validate() const;
  bool operator==(const FusionConfig&) const = default;
};

/// weight_joint * joint + weight_limb * limb, elementwise.
std::vector<float> fuse_scores(std::span<const float> joint, std::span<const float> limb,
                               const FusionConfig& fusion);

}  // namespace mgc
